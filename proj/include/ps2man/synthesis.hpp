#pragma once

#include <string>
#include <vector>

#include "ps2man/dataset.hpp"
#include "ps2man/trainer.hpp"

namespace ps2man {

enum class Direction { PhotoToSketch, SketchToPhoto };

Direction parse_direction(const std::string& s);
std::string direction_name(Direction d);

struct ManifestRow {
  std::string input_path;
  std::string output_path;  // empty when the input could not be read
  std::string direction;
  std::string checkpoint_hash;
};

struct SynthesisManifest {
  std::vector<ManifestRow> rows;
  std::string manifest_path;
};

struct SynthesisOptions {
  bool write_grid = true;
  AlignmentGeometry geometry;  // applied when the directory carries landmarks
};

/// FNV-1a over a file's bytes; identifies the checkpoint in manifests.
std::string file_hash_hex(const std::string& path);

/// Translate every image in a directory. Two layouts are understood:
/// a flat directory of already-aligned images, or a dataset-style layout
/// (photos/ or sketches/ plus landmarks.txt) which is aligned on the fly.
/// Each output keeps its input stem; unreadable inputs are skipped with a
/// warning and recorded in the manifest with an empty output path. When
/// ground truth for the opposite domain is present a side-by-side
/// input|output|truth grid is written too.
SynthesisManifest synthesize_directory(Trainer& trainer,
                                       const std::string& checkpoint_hash,
                                       const std::string& input_dir,
                                       Direction direction,
                                       const std::string& output_dir,
                                       const SynthesisOptions& options = {});

}  // namespace ps2man
