// odecme: diffeomorphic image registration via complex matrix exponentials.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "odecme/imaging.hpp"

namespace odecme {

// Format is chosen by extension:
//   .png          8/16-bit gray, gray+alpha, RGB, RGBA (2-D)
//   .pgm / .ppm   binary P5/P6, 8- or 16-bit big-endian (2-D)
//   .raw / .f32   little-endian float32 volume, described by a JSON sidecar
//                 at <path>.json: {"dims":[x,y,z],"channels":C,"dtype":"f32le"}
// Integer samples are scaled to [0,1] by their bit depth on load and
// re-quantized on save (16-bit for PGM/PPM, 8-bit PNG by default).
Image load_image(const std::string& path);
void save_image(const Image& img, const std::string& path);

bool is_volume_path(const std::string& path);

}  // namespace odecme
