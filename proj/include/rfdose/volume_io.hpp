#pragma once

#include <complex>
#include <string>

#include "rfdose/tissue.hpp"

namespace rfdose {

// DVOL1 container: ASCII header, then raw little-endian payload in x-fastest
// order. Header lines: magic, "dims nx ny nz", "voxel_mm v", "kind k",
// "byteorder little", "data". kind is one of label-u16, real-f64, complex-f64.
enum class VolumeKind { label_u16, real_f64, complex_f64 };

void write_volume(const LabelVolume& v, const std::string& path);
void write_volume(const GridD& v, double voxel_mm, const std::string& path);
void write_volume(const GridC& v, double voxel_mm, const std::string& path);

VolumeKind peek_volume_kind(const std::string& path);

LabelVolume read_label_volume(const std::string& path);
GridD read_real_volume(const std::string& path, double* voxel_mm = nullptr);
GridC read_complex_volume(const std::string& path, double* voxel_mm = nullptr);

} // namespace rfdose
