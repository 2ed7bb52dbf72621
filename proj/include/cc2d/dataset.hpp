#pragma once
// Dataset ingestion and persistence.
//
// On-disk layout:
//   <root>/images/<image_id>.bmp|png
//   <root>/annotations/<annotator>/<image_id>.txt   ("x,y" per line)
//   <root>/meta.json                                (geometry, K, splits)
//
// If meta.json is missing, the loader falls back to the public cephalometric
// challenge layout (1935x2400 @ 0.1mm, first 150 images train, next 250 test).

#include <optional>
#include <string>
#include <vector>

#include "cc2d/geometry.hpp"

namespace cc2d {

enum class Split { kTrain, kTest };
enum class LabelSource { kSsl, kGroundTruth };

struct ManifestEntry {
  std::string image_id;
  std::string image_path;
  std::vector<std::string> annotation_paths;  // one per annotator, may be empty
};

struct DatasetManifest {
  Split split = Split::kTrain;
  std::vector<ManifestEntry> entries;
  ImageGeometry geometry;
  int num_landmarks = 0;
  std::optional<double> jitter_px;  // synthetic sets record their jitter radius

  const ManifestEntry& find(const std::string& image_id) const;
};

struct PseudoLabelRecord {
  std::string image_id;
  LandmarkSet landmarks;  // ORIGINAL frame
  std::vector<double> confidences;
  LabelSource source = LabelSource::kSsl;
};

// Per-landmark arithmetic mean over annotator files; only the first K lines
// of each file are read. Malformed input reports file and line.
LandmarkSet load_annotation(const std::vector<std::string>& paths, const ImageGeometry& geom, int k);

DatasetManifest load_manifest(const std::string& root, Split split, int network_size);
LandmarkSet load_ground_truth(const DatasetManifest& manifest, const ManifestEntry& entry);

struct SyntheticParams {
  uint32_t seed = 0;
  int n_train = 8;
  int n_test = 8;
  int num_landmarks = 4;
  int original_width = 512;
  int original_height = 512;
  double pixel_spacing_mm = 0.5;
  int network_size = 192;
  double jitter_px = 16.0;  // max displacement from base location, original px
};

// Emits a deterministic synthetic dataset under root: distinct structures per
// landmark index on a textured background, annotations equal to the rendered
// placements exactly.
void generate_synthetic_dataset(const SyntheticParams& params, const std::string& root);

void save_pseudo_labels(const std::vector<PseudoLabelRecord>& records, const std::string& path);
std::vector<PseudoLabelRecord> load_pseudo_labels(const std::string& path);

}  // namespace cc2d
