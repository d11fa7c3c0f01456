#include "ps2man/synthesis.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "ps2man/image.hpp"

namespace fs = std::filesystem;

namespace ps2man {

Direction parse_direction(const std::string& s) {
  if (s == "photo2sketch") return Direction::PhotoToSketch;
  if (s == "sketch2photo") return Direction::SketchToPhoto;
  throw std::invalid_argument(
      "direction must be photo2sketch or sketch2photo, got '" + s + "'");
}

std::string direction_name(Direction d) {
  return d == Direction::PhotoToSketch ? "photo2sketch" : "sketch2photo";
}

std::string file_hash_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for hashing: " + path);
  uint64_t h = 1469598103934665603ull;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

namespace {

bool is_raster(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

// input | output | optional truth, one row per sample
Tensor compose_grid(const std::vector<std::array<Tensor, 3>>& rows,
                    bool with_truth) {
  const int cell = 256;
  const int cols = with_truth ? 3 : 2;
  Tensor grid(1, 3, cell * int(rows.size()), cell * cols);
  grid.fill(1.0f);
  for (size_t r = 0; r < rows.size(); ++r)
    for (int col = 0; col < cols; ++col) {
      const Tensor& src = rows[r][col];
      if (src.empty()) continue;
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < cell; ++y)
          for (int x = 0; x < cell; ++x)
            grid.at(0, c, int(r) * cell + y, col * cell + x) =
                src.at(0, c, y, x);
    }
  return grid;
}

}  // namespace

SynthesisManifest synthesize_directory(Trainer& trainer,
                                       const std::string& checkpoint_hash,
                                       const std::string& input_dir,
                                       Direction direction,
                                       const std::string& output_dir,
                                       const SynthesisOptions& options) {
  const fs::path in_root(input_dir);
  if (!fs::is_directory(in_root))
    throw std::runtime_error("input directory does not exist: " + input_dir);
  fs::create_directories(output_dir);

  const bool p2s = direction == Direction::PhotoToSketch;
  const char* source_sub = p2s ? "photos" : "sketches";
  const char* truth_sub = p2s ? "sketches" : "photos";

  // dataset-style layout?
  fs::path source_dir = in_root;
  bool aligned_layout = false;
  std::map<std::string, LandmarkAnnotation> marks;
  if (fs::is_directory(in_root / source_sub) &&
      fs::exists(in_root / "landmarks.txt")) {
    source_dir = in_root / source_sub;
    marks = load_landmarks((in_root / "landmarks.txt").string());
    aligned_layout = true;
  }

  std::vector<fs::path> inputs;
  for (const auto& e : fs::directory_iterator(source_dir))
    if (e.is_regular_file() && is_raster(e.path())) inputs.push_back(e.path());
  std::sort(inputs.begin(), inputs.end());

  SynthesisManifest manifest;
  std::vector<std::array<Tensor, 3>> grid_rows;
  bool any_truth = false;

  for (const auto& path : inputs) {
    ManifestRow row;
    row.input_path = path.string();
    row.direction = direction_name(direction);
    row.checkpoint_hash = checkpoint_hash;

    Tensor model_in;
    try {
      Tensor raw = load_image_rgb(path.string());
      const std::string stem = path.stem().string();
      if (aligned_layout) {
        auto it = marks.find(stem);
        if (it == marks.end())
          throw std::runtime_error("no landmarks for '" + stem + "'");
        raw = align_and_crop(raw, it->second, options.geometry);
      }
      model_in = to_model_resolution(raw, options.geometry.model_resolution);
    } catch (const std::exception& e) {
      std::cerr << "warning: skipping " << path << ": " << e.what() << "\n";
      manifest.rows.push_back(row);
      continue;
    }

    Tensor out = p2s ? trainer.infer_photo_to_sketch(model_in)
                     : trainer.infer_sketch_to_photo(model_in);
    const fs::path out_path =
        fs::path(output_dir) / (path.stem().string() + ".png");
    save_image_png(out, out_path.string());
    row.output_path = out_path.string();
    manifest.rows.push_back(row);

    if (options.write_grid) {
      std::array<Tensor, 3> cells{model_in, out, Tensor()};
      if (aligned_layout) {
        const fs::path truth =
            in_root / truth_sub / (path.stem().string() + path.extension().string());
        if (fs::exists(truth)) {
          auto it = marks.find(path.stem().string());
          Tensor traw = load_image_rgb(truth.string());
          cells[2] = to_model_resolution(
              align_and_crop(traw, it->second, options.geometry),
              options.geometry.model_resolution);
          any_truth = true;
        }
      }
      grid_rows.push_back(std::move(cells));
    }
  }

  if (options.write_grid && !grid_rows.empty())
    save_image_png(compose_grid(grid_rows, any_truth),
                   (fs::path(output_dir) / "grid.png").string());

  const fs::path mpath = fs::path(output_dir) / "manifest.csv";
  std::ofstream m(mpath);
  m << "input_path,output_path,direction,checkpoint_hash\n";
  for (const auto& r : manifest.rows)
    m << r.input_path << "," << r.output_path << "," << r.direction << ","
      << r.checkpoint_hash << "\n";
  manifest.manifest_path = mpath.string();
  return manifest;
}

}  // namespace ps2man
