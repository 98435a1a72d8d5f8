#pragma once

#include "imgproc/image.hpp"
#include "ssm/warp.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace regtrack {

inline constexpr const char* kGroundTruthFile = "groundtruth.txt";
inline constexpr const char* kGroundTruthHeader = "frame ulx uly urx ury lrx lry llx lly";

/// Frames either live on disk (directory + file names) or in memory.
struct Sequence {
  std::string name;
  std::filesystem::path directory;
  std::vector<std::string> frames;
  std::vector<Corners> truth;
  std::vector<GrayImage> images;

  std::size_t size() const { return frames.size(); }
  GrayImage frame(std::size_t i) const;
};

struct GroundTruth {
  std::vector<std::string> frames;
  std::vector<Corners> corners;
};

/// Header line, then "name x y x y x y x y" per frame, corners UL UR LR LL.
GroundTruth parse_ground_truth(const std::string& text);
std::string format_ground_truth(const GroundTruth& gt);

GroundTruth read_ground_truth(const std::filesystem::path& path);
void write_ground_truth(const std::filesystem::path& path, const GroundTruth& gt);

/// Reads <dir>/groundtruth.txt and checks that every listed frame exists and
/// that the directory holds no unlisted image frames.
Sequence load_sequence(const std::filesystem::path& dir);
/// Writes the frames as 8-bit PGM plus the ground-truth file.
void write_sequence(const std::filesystem::path& dir, const Sequence& seq);

/// Least-squares projection of every frame's corners onto the SSM: the warp
/// fitted from the first frame's corners to frame i, applied to the first
/// frame's corners.
std::vector<Corners> project_ground_truth(const WarpModel& model, const std::vector<Corners>& truth);

enum class Photometric { none, gain_bias, subregion_gain };

const char* to_string(Photometric p);
Photometric parse_photometric(std::string_view name);

struct SynthConfig {
  std::string name = "synth";
  int width = 320;
  int height = 240;
  int frames = 50;
  // Initial box edge length, centered in the image.
  double box_size = 100.0;
  // Motion: a translation random walk (px per frame per axis) plus an AR(1)
  // corner jitter (stationary std shape_sigma px, correlation shape_rho), the
  // resulting box projected onto motion_ssm.
  SsmKind motion_ssm = SsmKind::homography;
  double translation_sigma = 1.0;
  double shape_sigma = 0.0;
  double shape_rho = 0.9;
  Photometric photometric = Photometric::none;
  // Gains oscillate as 1 + gain_amplitude * sin(.), biases as bias_amplitude * sin(.).
  double gain_amplitude = 0.0;
  double bias_amplitude = 0.0;
  double photometric_period = 20.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

/// Smoothed, contrast-stretched uniform noise; a deterministic textured scene.
GrayImage textured_image(int width, int height, std::uint64_t seed);

/// Motion boxes for cfg (frame 0 is the centered initial box).
std::vector<Corners> synth_motion(const SynthConfig& cfg);

/// Renders each frame by inverse-warping the base through the homography that
/// takes boxes[0] to boxes[i], then applies the photometric change and
/// Gaussian noise and clips to [0,255]. Throws when a box leaves the image.
Sequence synth_sequence(const GrayImage& base, const std::vector<Corners>& boxes, const SynthConfig& cfg);

/// textured_image + synth_motion + synth_sequence.
Sequence synth_sequence(const SynthConfig& cfg);

}  // namespace regtrack
