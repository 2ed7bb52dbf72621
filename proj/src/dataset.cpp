#include "cc2d/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <opencv2/imgproc.hpp>
#include <random>
#include <set>
#include <sstream>

#include "cc2d/image.hpp"
#include "cc2d/vendor_json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cc2d {
namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::pair<double, double> parse_xy(const std::string& line, const std::string& file, int lineno) {
  const auto comma = line.find(',');
  if (comma == std::string::npos)
    throw std::runtime_error(file + ":" + std::to_string(lineno) + ": expected \"x,y\"");
  try {
    size_t pos = 0;
    const std::string xs = trim(line.substr(0, comma));
    const std::string ys = trim(line.substr(comma + 1));
    const double x = std::stod(xs, &pos);
    if (pos != xs.size()) throw std::invalid_argument("trailing junk");
    const double y = std::stod(ys, &pos);
    if (pos != ys.size()) throw std::invalid_argument("trailing junk");
    return {x, y};
  } catch (const std::exception&) {
    throw std::runtime_error(file + ":" + std::to_string(lineno) + ": malformed coordinate pair \"" +
                             trim(line) + "\"");
  }
}

std::vector<std::string> list_image_ids(const fs::path& images_dir) {
  std::vector<std::string> ids;
  for (const auto& e : fs::directory_iterator(images_dir)) {
    const auto ext = e.path().extension().string();
    if (ext == ".bmp" || ext == ".png") ids.push_back(e.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::string find_image(const fs::path& images_dir, const std::string& id) {
  for (const char* ext : {".bmp", ".png"}) {
    const fs::path p = images_dir / (id + ext);
    if (fs::exists(p)) return p.string();
  }
  throw std::runtime_error("dataset: missing image for id " + id);
}

json geometry_to_json(const ImageGeometry& g) {
  return json{{"original_width", g.original_width},
              {"original_height", g.original_height},
              {"pixel_spacing_mm", g.pixel_spacing_mm}};
}

ImageGeometry geometry_from_json(const json& j, int network_size) {
  ImageGeometry g;
  g.original_width = j.at("original_width").get<int>();
  g.original_height = j.at("original_height").get<int>();
  g.pixel_spacing_mm = j.at("pixel_spacing_mm").get<double>();
  g.network_size = network_size;
  g.validate();
  return g;
}

}  // namespace

const ManifestEntry& DatasetManifest::find(const std::string& image_id) const {
  for (const auto& e : entries)
    if (e.image_id == image_id) return e;
  throw std::runtime_error("manifest: unknown image id " + image_id);
}

LandmarkSet load_annotation(const std::vector<std::string>& paths, const ImageGeometry& geom, int k) {
  if (paths.empty()) throw std::invalid_argument("load_annotation: no annotator files");
  std::vector<double> sx(k, 0.0), sy(k, 0.0);
  for (const auto& path : paths) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_annotation: cannot open " + path);
    std::string line;
    int parsed = 0, lineno = 0;
    while (parsed < k && std::getline(in, line)) {
      ++lineno;
      const auto [x, y] = parse_xy(line, path, lineno);
      if (!(x >= 0 && x < geom.original_width && y >= 0 && y < geom.original_height))
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": coordinate out of bounds");
      sx[parsed] += x;
      sy[parsed] += y;
      ++parsed;
    }
    if (parsed < k)
      throw std::runtime_error(path + ": expected at least " + std::to_string(k) + " landmarks, got " +
                               std::to_string(parsed));
  }
  LandmarkSet set{geom, {}};
  const double inv = 1.0 / paths.size();
  for (int i = 0; i < k; ++i)
    set.landmarks.push_back({i, sx[i] * inv, sy[i] * inv, Frame::kOriginal});
  set.validate();
  return set;
}

DatasetManifest load_manifest(const std::string& root, Split split, int network_size) {
  const fs::path rootp(root);
  const fs::path images_dir = rootp / "images";
  if (!fs::is_directory(images_dir))
    throw std::runtime_error("dataset: no images/ directory under " + root);

  DatasetManifest m;
  m.split = split;
  std::vector<std::string> ids;
  std::vector<std::string> annotators;

  const fs::path meta_path = rootp / "meta.json";
  if (fs::exists(meta_path)) {
    std::ifstream in(meta_path);
    json meta;
    in >> meta;
    if (meta.value("format_version", 0) != 1)
      throw std::runtime_error("dataset: unsupported meta.json format_version");
    m.geometry = geometry_from_json(meta.at("geometry"), network_size);
    m.num_landmarks = meta.at("num_landmarks").get<int>();
    ids = meta.at(split == Split::kTrain ? "train_ids" : "test_ids").get<std::vector<std::string>>();
    annotators = meta.at("annotators").get<std::vector<std::string>>();
    if (meta.contains("jitter_px")) m.jitter_px = meta.at("jitter_px").get<double>();
  } else {
    // Public cephalometric challenge layout.
    m.geometry = ImageGeometry{1935, 2400, 0.1, network_size};
    m.num_landmarks = 19;
    const auto all = list_image_ids(images_dir);
    if (all.size() != 400)
      throw std::runtime_error("dataset: challenge layout expects 400 images, found " +
                               std::to_string(all.size()) + " (or provide meta.json)");
    ids.assign(split == Split::kTrain ? all.begin() : all.begin() + 150,
               split == Split::kTrain ? all.begin() + 150 : all.end());
    for (const auto& e : fs::directory_iterator(rootp / "annotations"))
      if (e.is_directory()) annotators.push_back(e.path().filename().string());
    std::sort(annotators.begin(), annotators.end());
  }

  for (const auto& id : ids) {
    ManifestEntry entry;
    entry.image_id = id;
    entry.image_path = find_image(images_dir, id);
    for (const auto& ann : annotators) {
      const fs::path p = rootp / "annotations" / ann / (id + ".txt");
      if (fs::exists(p)) entry.annotation_paths.push_back(p.string());
    }
    m.entries.push_back(std::move(entry));
  }
  return m;
}

LandmarkSet load_ground_truth(const DatasetManifest& manifest, const ManifestEntry& entry) {
  if (entry.annotation_paths.empty())
    throw std::runtime_error("dataset: no annotations for image " + entry.image_id);
  return load_annotation(entry.annotation_paths, manifest.geometry, manifest.num_landmarks);
}

// ---------------------------------------------------------------------------
// Synthetic dataset
// ---------------------------------------------------------------------------
namespace {

// Visually distinct structure per landmark index, drawn centered at (cx, cy).
void draw_structure(cv::Mat1f& img, int index, int cx, int cy, int radius) {
  const cv::Point c(cx, cy);
  const int r = radius;
  // Fills sit well outside the background band on both sides so every
  // structure keeps contrast against the texture wherever it lands.
  const float bright = (index % 2 == 0) ? 0.85f : 0.03f;
  const float mid = (index % 2 == 0) ? 0.60f : 0.35f;
  switch (index % 8) {
    case 0:
      cv::circle(img, c, r, bright, -1, cv::LINE_AA);
      break;
    case 1:
      cv::circle(img, c, r, bright, std::max(2, r / 3), cv::LINE_AA);
      break;
    case 2:
      cv::line(img, c - cv::Point(r, 0), c + cv::Point(r, 0), bright, std::max(2, r / 4), cv::LINE_AA);
      cv::line(img, c - cv::Point(0, r), c + cv::Point(0, r), bright, std::max(2, r / 4), cv::LINE_AA);
      break;
    case 3: {
      const cv::Point pts[4] = {c + cv::Point(0, -r), c + cv::Point(r, 0), c + cv::Point(0, r),
                                c + cv::Point(-r, 0)};
      cv::fillConvexPoly(img, pts, 4, bright, cv::LINE_AA);
      break;
    }
    case 4: {
      const cv::Point pts[3] = {c + cv::Point(0, -r), c + cv::Point(r, r), c + cv::Point(-r, r)};
      cv::fillConvexPoly(img, pts, 3, bright, cv::LINE_AA);
      break;
    }
    case 5:
      cv::line(img, c - cv::Point(r, r), c + cv::Point(r, r), bright, std::max(2, r / 4), cv::LINE_AA);
      cv::line(img, c + cv::Point(-r, r), c + cv::Point(r, -r), bright, std::max(2, r / 4), cv::LINE_AA);
      break;
    case 6:
      cv::rectangle(img, c - cv::Point(r, r), c + cv::Point(r, r), bright, std::max(2, r / 4));
      break;
    default:
      cv::circle(img, c, r, mid, -1, cv::LINE_AA);
      cv::circle(img, c, r / 2, 1.f - bright, -1, cv::LINE_AA);
      break;
  }
}

cv::Mat1f render_background(int w, int h, std::mt19937& rng) {
  cv::Mat1f bg(h, w);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  const float phase_x = u(rng) * 6.28318f;
  const float phase_y = u(rng) * 6.28318f;
  const float gx = 0.06f + 0.06f * u(rng);
  for (int y = 0; y < h; ++y) {
    float* row = bg.ptr<float>(y);
    const float fy = static_cast<float>(y) / h;
    for (int x = 0; x < w; ++x) {
      const float fx = static_cast<float>(x) / w;
      row[x] = 0.32f + gx * fx + 0.05f * fy + 0.04f * std::sin(6.0f * fx * 3.1415f + phase_x) +
               0.04f * std::sin(5.0f * fy * 3.1415f + phase_y);
    }
  }
  return bg;
}

// Band-limited texture so that dense patch matching is well posed: flat
// regions make small neighborhoods indistinguishable from each other. Applied
// after the structures are drawn so their interiors stay distinctive too.
// Only fine scales: coarser octaves would produce structure-sized blobs that
// act as decoys for the actual structures, and the texture is drawn fresh per
// image so such blobs would never correspond across images.
void add_texture(cv::Mat1f& img, std::mt19937& rng) {
  const int w = img.cols, h = img.rows;
  cv::Mat1f noise(h, w);
  std::normal_distribution<float> g(0.f, 1.f);
  for (int y = 0; y < h; ++y) {
    float* row = noise.ptr<float>(y);
    for (int x = 0; x < w; ++x) row[x] = g(rng);
  }
  const double sigmas[2] = {std::max(1.0, w / 128.0), std::max(2.0, w / 64.0)};
  const float amps[2] = {0.08f, 0.06f};
  for (int o = 0; o < 2; ++o) {
    cv::Mat1f octave;
    cv::GaussianBlur(noise, octave, cv::Size(0, 0), sigmas[o]);
    cv::Scalar om, os;
    cv::meanStdDev(octave, om, os);
    img += amps[o] * (octave - static_cast<float>(om[0])) / static_cast<float>(os[0] + 1e-9);
  }
}

}  // namespace

void generate_synthetic_dataset(const SyntheticParams& p, const std::string& root) {
  if (p.n_train < 1 || p.num_landmarks < 1)
    throw std::invalid_argument("synthetic: need at least one image and one landmark");
  ImageGeometry geom{p.original_width, p.original_height, p.pixel_spacing_mm, p.network_size};
  geom.validate();

  const int radius = std::max(6, std::min(p.original_width, p.original_height) / 24);
  // Keep every landmark at least 8 network pixels (plus structure extent) off the borders.
  const double net_margin = 8.0 * std::max(1.0 / geom.scale_x(), 1.0 / geom.scale_y());
  const int border = static_cast<int>(std::ceil(net_margin + radius + p.jitter_px)) + 2;
  const int usable_w = p.original_width - 2 * border;
  const int usable_h = p.original_height - 2 * border;
  const int min_sep = 2 * radius + 2 * static_cast<int>(p.jitter_px) + 4;
  if (usable_w <= 0 || usable_h <= 0)
    throw std::invalid_argument("synthetic: image too small for the requested margins");

  // Base locations on a shuffled grid, spaced so structures never overlap.
  const int grid = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(p.num_landmarks))));
  if (usable_w / grid < min_sep || usable_h / grid < min_sep)
    throw std::invalid_argument("synthetic: K too large to place non-overlapping structures");
  std::mt19937 rng(p.seed);
  std::vector<int> cells(grid * grid);
  for (size_t i = 0; i < cells.size(); ++i) cells[i] = static_cast<int>(i);
  std::shuffle(cells.begin(), cells.end(), rng);
  std::vector<cv::Point2d> base(p.num_landmarks);
  std::uniform_real_distribution<double> uu(0.3, 0.7);
  for (int k = 0; k < p.num_landmarks; ++k) {
    const int cy = cells[k] / grid, cx = cells[k] % grid;
    base[k].x = border + (cx + uu(rng)) * usable_w / grid;
    base[k].y = border + (cy + uu(rng)) * usable_h / grid;
  }

  const fs::path rootp(root);
  fs::create_directories(rootp / "images");
  fs::create_directories(rootp / "annotations" / "synthetic");

  std::vector<std::string> train_ids, test_ids;
  const int total = p.n_train + p.n_test;
  for (int i = 0; i < total; ++i) {
    const bool is_train = i < p.n_train;
    std::ostringstream oss;
    oss << (is_train ? "train_" : "test_") << std::setw(3) << std::setfill('0')
        << (is_train ? i : i - p.n_train);
    const std::string id = oss.str();
    (is_train ? train_ids : test_ids).push_back(id);

    std::mt19937 img_rng(p.seed * 7919u + static_cast<uint32_t>(i) * 104729u + 13u);
    cv::Mat1f img = render_background(p.original_width, p.original_height, img_rng);

    // Smooth global deformation plus bounded per-landmark jitter; together they
    // stay within jitter_px of the base location.
    std::uniform_real_distribution<double> uphase(0.0, 6.283185);
    const double def_amp = 0.4 * p.jitter_px;
    const double jit_amp = 0.6 * p.jitter_px;
    const double phx = uphase(img_rng), phy = uphase(img_rng);
    std::uniform_real_distribution<double> uang(0.0, 6.283185);
    std::uniform_real_distribution<double> urad(0.0, 1.0);

    std::ofstream ann(rootp / "annotations" / "synthetic" / (id + ".txt"));
    for (int k = 0; k < p.num_landmarks; ++k) {
      const double dx = def_amp * std::sin(2.0 * 3.141592653589793 * base[k].x / p.original_width + phx);
      const double dy = def_amp * std::sin(2.0 * 3.141592653589793 * base[k].y / p.original_height + phy);
      const double ang = uang(img_rng);
      const double rad = jit_amp * std::sqrt(urad(img_rng));
      const int cx = static_cast<int>(std::lround(base[k].x + dx + rad * std::cos(ang)));
      const int cy = static_cast<int>(std::lround(base[k].y + dy + rad * std::sin(ang)));
      draw_structure(img, k, cx, cy, radius);
      ann << cx << "," << cy << "\n";
    }
    add_texture(img, img_rng);
    cv::Mat1f clipped;
    cv::min(cv::max(img, 0.f), 1.f, clipped);
    save_gray(clipped, (rootp / "images" / (id + ".bmp")).string());
  }

  json meta{{"format_version", 1},
            {"kind", "synthetic"},
            {"geometry", geometry_to_json(geom)},
            {"num_landmarks", p.num_landmarks},
            {"annotators", {"synthetic"}},
            {"train_ids", train_ids},
            {"test_ids", test_ids},
            {"jitter_px", p.jitter_px},
            {"seed", p.seed}};
  std::ofstream(rootp / "meta.json") << meta.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Pseudo-label persistence
// ---------------------------------------------------------------------------

void save_pseudo_labels(const std::vector<PseudoLabelRecord>& records, const std::string& path) {
  json recs = json::array();
  for (const auto& r : records) {
    if (static_cast<int>(r.confidences.size()) != r.landmarks.k())
      throw std::invalid_argument("pseudo-labels: confidence count does not match K");
    for (double c : r.confidences)
      if (!(c >= 0.0 && c <= 1.0))
        throw std::invalid_argument("pseudo-labels: confidence outside [0, 1]");
    r.landmarks.validate();
    if (!r.landmarks.landmarks.empty() && r.landmarks.landmarks[0].frame != Frame::kOriginal)
      throw std::invalid_argument("pseudo-labels: landmarks must be in the original frame");
    json pts = json::array();
    for (int i = 0; i < r.landmarks.k(); ++i) {
      const auto& lm = r.landmarks.landmarks[i];
      pts.push_back({lm.x, lm.y, r.confidences[i]});
    }
    recs.push_back({{"image_id", r.image_id},
                    {"source", r.source == LabelSource::kSsl ? "SSL" : "GROUND_TRUTH"},
                    {"landmarks", pts},
                    {"geometry", geometry_to_json(r.landmarks.geometry)},
                    {"network_size", r.landmarks.geometry.network_size}});
  }
  json doc{{"format_version", 1},
           {"num_landmarks", records.empty() ? 0 : records.front().landmarks.k()},
           {"records", recs}};
  const std::string tmp = path + ".tmp";
  std::ofstream out(tmp);
  if (!out) throw std::runtime_error("pseudo-labels: cannot write " + path);
  out << doc.dump(2) << "\n";
  out.close();
  fs::rename(tmp, path);
}

std::vector<PseudoLabelRecord> load_pseudo_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("pseudo-labels: cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("pseudo-labels: parse error in " + path + ": " + e.what());
  }
  if (doc.value("format_version", 0) != 1)
    throw std::runtime_error("pseudo-labels: unsupported format_version in " + path);
  const int k = doc.at("num_landmarks").get<int>();
  std::vector<PseudoLabelRecord> out;
  for (const auto& rj : doc.at("records")) {
    PseudoLabelRecord r;
    r.image_id = rj.at("image_id").get<std::string>();
    r.source = rj.at("source").get<std::string>() == "SSL" ? LabelSource::kSsl : LabelSource::kGroundTruth;
    r.landmarks.geometry = geometry_from_json(rj.at("geometry"), rj.at("network_size").get<int>());
    const auto& pts = rj.at("landmarks");
    if (static_cast<int>(pts.size()) != k)
      throw std::runtime_error("pseudo-labels: record " + r.image_id + " has wrong K");
    for (int i = 0; i < k; ++i) {
      r.landmarks.landmarks.push_back(
          {i, pts[i][0].get<double>(), pts[i][1].get<double>(), Frame::kOriginal});
      r.confidences.push_back(pts[i][2].get<double>());
    }
    r.landmarks.validate();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace cc2d
