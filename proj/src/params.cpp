// odecme: diffeomorphic image registration via complex matrix exponentials.
// SPDX-License-Identifier: Apache-2.0
#include "odecme/params.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "odecme/error.hpp"

namespace odecme {

size_t ParameterTape::add_segment(const std::string& name, size_t length) {
  if (has_segment(name)) throw Error::invalid("parameter segment '" + name + "' already exists");
  Segment s{name, values_.size(), length};
  segments_.push_back(s);
  values_.resize(values_.size() + length, 0.0);
  grads_.resize(values_.size(), 0.0);
  adam_m_.resize(values_.size(), 0.0);
  adam_v_.resize(values_.size(), 0.0);
  return s.offset;
}

bool ParameterTape::has_segment(const std::string& name) const {
  return std::any_of(segments_.begin(), segments_.end(),
                     [&](const Segment& s) { return s.name == name; });
}

const ParameterTape::Segment& ParameterTape::find(const std::string& name) const {
  for (const Segment& s : segments_)
    if (s.name == name) return s;
  throw Error::invalid("no parameter segment named '" + name + "'");
}

double* ParameterTape::segment_values(const std::string& name) {
  return values_.data() + find(name).offset;
}
const double* ParameterTape::segment_values(const std::string& name) const {
  return values_.data() + find(name).offset;
}
double* ParameterTape::segment_grads(const std::string& name) {
  return grads_.data() + find(name).offset;
}
size_t ParameterTape::segment_length(const std::string& name) const {
  return find(name).length;
}

void ParameterTape::zero_grads() { std::fill(grads_.begin(), grads_.end(), 0.0); }

void ParameterTape::adam_step(const std::map<std::string, double>& lr, double beta1,
                              double beta2, double eps) {
  ++step_;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
  for (const Segment& s : segments_) {
    auto it = lr.find(s.name);
    if (it == lr.end()) continue;
    double rate = it->second;
    for (size_t i = s.offset; i < s.offset + s.length; ++i) {
      double g = grads_[i];
      adam_m_[i] = beta1 * adam_m_[i] + (1.0 - beta1) * g;
      adam_v_[i] = beta2 * adam_v_[i] + (1.0 - beta2) * g * g;
      double mhat = adam_m_[i] / bc1;
      double vhat = adam_v_[i] / bc2;
      values_[i] -= rate * mhat / (std::sqrt(vhat) + eps);
      if (!std::isfinite(values_[i]))
        throw Error::numeric("parameter overflow in segment '" + s.name + "'");
    }
  }
}

std::string ParameterTape::checkpoint_json() const {
  nlohmann::ordered_json j;
  j["segments"] = nlohmann::ordered_json::array();
  for (const Segment& s : segments_)
    j["segments"].push_back({{"name", s.name}, {"offset", s.offset}, {"length", s.length}});
  j["values"] = values_;
  j["adam"] = {{"m", adam_m_}, {"v", adam_v_}, {"step", step_}};
  return j.dump(2);
}

ParameterTape ParameterTape::from_checkpoint_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error::io(std::string("checkpoint parse failure: ") + e.what());
  }
  ParameterTape tape;
  if (!j.contains("segments") || !j.contains("values"))
    throw Error::io("checkpoint missing segments/values");
  for (const auto& s : j["segments"])
    tape.add_segment(s.at("name").get<std::string>(), s.at("length").get<size_t>());
  std::vector<double> values = j["values"].get<std::vector<double>>();
  if (values.size() != tape.values_.size())
    throw Error::io("checkpoint value count does not match segment map");
  tape.values_ = std::move(values);
  if (j.contains("adam")) {
    auto m = j["adam"].value("m", std::vector<double>{});
    auto v = j["adam"].value("v", std::vector<double>{});
    if (m.size() == tape.values_.size() && v.size() == tape.values_.size()) {
      tape.adam_m_ = std::move(m);
      tape.adam_v_ = std::move(v);
      tape.step_ = j["adam"].value("step", 0L);
    }
  }
  return tape;
}

}  // namespace odecme
