// odecme: diffeomorphic image registration via complex matrix exponentials.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

namespace odecme {

// Flat storage for every learnable scalar, grouped into named segments
// (coefficient seed, flow net, critic net). Grads mirror values; Adam state
// is kept here so optimization can be checkpointed and resumed.
class ParameterTape {
 public:
  struct Segment {
    std::string name;
    size_t offset = 0;
    size_t length = 0;
  };

  size_t add_segment(const std::string& name, size_t length);
  bool has_segment(const std::string& name) const;
  const std::vector<Segment>& segments() const { return segments_; }

  double* segment_values(const std::string& name);
  const double* segment_values(const std::string& name) const;
  double* segment_grads(const std::string& name);
  size_t segment_length(const std::string& name) const;

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& grads() { return grads_; }
  size_t size() const { return values_.size(); }

  void zero_grads();

  // One Adam update over all segments; each segment uses its own rate from
  // `lr` (a segment missing from the map is frozen). The bias-correction
  // step count is shared. Throws on non-finite values after the update.
  void adam_step(const std::map<std::string, double>& lr, double beta1 = 0.9,
                 double beta2 = 0.999, double eps = 1e-8);
  long adam_steps() const { return step_; }

  // {"segments":[{name,offset,length}...], "values":[...], "adam":{...}}
  std::string checkpoint_json() const;
  static ParameterTape from_checkpoint_json(const std::string& text);

 private:
  const Segment& find(const std::string& name) const;

  std::vector<Segment> segments_;
  std::vector<double> values_, grads_;
  std::vector<double> adam_m_, adam_v_;
  long step_ = 0;
};

}  // namespace odecme
