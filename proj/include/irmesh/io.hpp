#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "irmesh/albedo.hpp"
#include "irmesh/camera.hpp"
#include "irmesh/geometry.hpp"
#include "irmesh/shading.hpp"
#include "irmesh/synth_eval.hpp"

namespace irmesh {

// ---------------------------------------------------------------------------
// Meshes. Format picked by extension: .ply (ascii, double precision) or .obj.
// Values are printed with enough digits to reload bit-identically.
// ---------------------------------------------------------------------------

TriangleMesh load_mesh(const std::filesystem::path& path);
void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Images. Format picked by extension: .pfm (32-bit float, bottom-up rows) or
// .png (16-bit grayscale; intensities quantized over [0, 1]). The gamma state
// is not stored in the image file; it travels in the views file record.
// ---------------------------------------------------------------------------

ShadingImage load_image(const std::filesystem::path& path);
void save_image(const ShadingImage& image, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Views files: plain text, one block per view. Schema (world-to-camera
// rotation in row-major order, image path relative to the views file):
//
//   view
//     image view_000.pfm
//     gamma_applied 0
//     intrinsics fx fy cx cy width height
//     rotation r00 r01 r02 r10 r11 r12 r20 r21 r22
//     translation tx ty tz
//     light_offset x y z
//   end
//
// Malformed records are rejected with the offending line number; poses are
// validated (orthonormal, det +1) on load.
// ---------------------------------------------------------------------------

std::vector<View> load_views(const std::filesystem::path& path);

// Writes the records and every view's image (named <stem>_NNN<ext>) next to
// the file. image_extension selects .pfm or .png.
void save_views(const std::vector<View>& views, const std::filesystem::path& path,
                const std::string& image_extension = ".pfm");

// ---------------------------------------------------------------------------
// Albedo files: plain text.
//   mode global            |  mode grouped
//   value 7.2e5            |  groups K
//                          |  values v0 ... v{K-1}
//                          |  labels N
//                          |  <N label integers, whitespace-separated>
// ---------------------------------------------------------------------------

AlbedoModel load_albedo(const std::filesystem::path& path);
void save_albedo(const AlbedoModel& model, const std::filesystem::path& path);

// Material maps: one integer label per line.
std::vector<int> load_labels(const std::filesystem::path& path);
void save_labels(const std::vector<int>& labels, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Scene directories: truth.ply, degraded.ply, views.txt (+ images),
// albedo.txt, labels.txt, light.txt. Produced by the synth subcommand and
// consumed by eval.
// ---------------------------------------------------------------------------

void save_scene(const SyntheticScene& scene, const std::filesystem::path& directory);
SyntheticScene load_scene(const std::filesystem::path& directory);

// ---------------------------------------------------------------------------
// Checksums and manifests.
// ---------------------------------------------------------------------------

std::string sha256_hex(const void* data, std::size_t size);
std::string sha256_file(const std::filesystem::path& path);

// Writes <directory>/manifest.json listing each file (path relative to the
// directory) with its size and SHA-256.
void write_manifest(const std::filesystem::path& directory,
                    const std::vector<std::filesystem::path>& files);

}  // namespace irmesh
