#include "klrf/io.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace klrf::io {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json parse_json(std::string const & text, std::string const & where)
{
  try {
    return json::parse(text);
  } catch (json::exception const & e) {
    throw ParseError(where + ": " + e.what());
  }
}

template <class T>
T field(json const & j, char const * key, std::string const & where)
{
  if (!j.contains(key)) throw ParseError(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (json::exception const & e) {
    throw ParseError(where + ": field '" + key + "': " + e.what());
  }
}

std::string read_text(fs::path const & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json plane_to_json(LayoutPlane const & p)
{
  return {{"label", p.label}, {"normal", {p.normal[0], p.normal[1], p.normal[2]}}, {"offset", p.offset}};
}

} // namespace

//============================================================================
// Reading
//============================================================================

DatasetManifest read_manifest(fs::path const & path)
{
  std::string const where = path.string();
  json const j = parse_json(read_text(path), where);
  DatasetManifest m;
  m.name = field<std::string>(j, "name", where);
  m.joint_count = field<std::size_t>(j, "joint_count", where);
  m.plane_labels = field<std::vector<std::string>>(j, "plane_labels", where);
  m.class_names = field<std::vector<std::string>>(j, "class_names", where);
  if (j.contains("appearance_dim") && !j.at("appearance_dim").is_null())
    m.appearance_dim = field<std::size_t>(j, "appearance_dim", where);
  m.sequence_files = field<std::vector<std::string>>(j, "sequences", where);
  return m;
}

ActionSequence read_sequence(fs::path const & path)
{
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open sequence file " + path.string());

  ActionSequence seq;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  std::vector<std::vector<double>> appearance_rows;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string const where = path.string() + ":" + std::to_string(line_no);
    json const rec = parse_json(line, where);

    if (!header) {
      seq.id = field<std::string>(rec, "id", where);
      seq.subject = rec.value("subject", "");
      seq.view = rec.value("view", "");
      seq.label = field<std::string>(rec, "label", where);
      seq.augmentation_group = rec.value("augmentation_group", "");
      if (rec.contains("planes"))
        for (auto const & p : rec.at("planes")) {
          LayoutPlane plane;
          plane.label = field<std::string>(p, "label", where);
          auto n = field<std::vector<double>>(p, "normal", where);
          if (n.size() != 3) throw ParseError(where + ": plane normal must have 3 entries");
          plane.normal = {n[0], n[1], n[2]};
          plane.offset = field<double>(p, "offset", where);
          seq.planes.push_back(std::move(plane));
        }
      header = true;
      continue;
    }

    std::size_t const t = field<std::size_t>(rec, "t", where);
    if (rec.contains("joints")) {
      SkeletonFrame frame;
      frame.t = static_cast<int>(t);
      for (auto const & jt : rec.at("joints")) {
        auto v = jt.get<std::vector<double>>();
        if (v.size() != 3) throw ParseError(where + ": joint must have 3 coordinates");
        frame.joints.push_back({v[0], v[1], v[2]});
      }
      seq.frames.push_back(std::move(frame));
    }
    if (rec.contains("appearance")) appearance_rows.push_back(field<std::vector<double>>(rec, "appearance", where));
    if (rec.contains("depth")) {
      auto const & d = rec.at("depth");
      DepthFrame frame;
      frame.width = field<int>(d, "width", where);
      frame.height = field<int>(d, "height", where);
      frame.values = field<std::vector<double>>(d, "values", where);
      if (frame.width <= 0 || frame.height <= 0 ||
          frame.values.size() != static_cast<std::size_t>(frame.width) * static_cast<std::size_t>(frame.height))
        throw DimensionMismatchError(where + ": depth values do not match width * height");
      seq.depth_frames.push_back(std::move(frame));
    }
  }
  if (!header) throw ParseError(path.string() + ": empty sequence file");

  if (!appearance_rows.empty()) {
    std::size_t const d = appearance_rows.front().size();
    Matrix m(appearance_rows.size(), d);
    for (std::size_t t = 0; t < appearance_rows.size(); ++t) {
      if (appearance_rows[t].size() != d)
        throw DimensionMismatchError(path.string() + ": appearance rows differ in length");
      std::copy(appearance_rows[t].begin(), appearance_rows[t].end(), m.row(t).begin());
    }
    seq.appearance_frames = std::move(m);
  }
  return seq;
}

std::vector<ActionSequence> load_dataset(fs::path const & manifest_path)
{
  DatasetManifest const manifest = read_manifest(manifest_path);
  fs::path const base = manifest_path.parent_path();
  std::set<std::string> const classes(manifest.class_names.begin(), manifest.class_names.end());

  std::vector<ActionSequence> sequences;
  sequences.reserve(manifest.sequence_files.size());
  for (auto const & rel : manifest.sequence_files) {
    fs::path const file = base / rel;
    ActionSequence seq = read_sequence(file);
    std::string const where = file.string() + ": ";

    if (!classes.count(seq.label)) throw UnknownClassError(where + "unknown class name '" + seq.label + "'");
    for (auto const & frame : seq.frames)
      if (frame.joints.size() != manifest.joint_count)
        throw DimensionMismatchError(where + "frame " + std::to_string(frame.t) + " has " +
                                     std::to_string(frame.joints.size()) + " joints, manifest declares " +
                                     std::to_string(manifest.joint_count));
    if (!seq.planes.empty()) {
      if (seq.planes.size() != manifest.plane_labels.size())
        throw DimensionMismatchError(where + "plane count differs from the manifest's plane_labels");
      // reorder to the manifest's declared order
      std::vector<LayoutPlane> ordered;
      for (auto const & label : manifest.plane_labels) {
        auto it = std::find_if(seq.planes.begin(), seq.planes.end(),
                               [&](LayoutPlane const & p) { return p.label == label; });
        if (it == seq.planes.end()) throw DimensionMismatchError(where + "missing plane '" + label + "'");
        ordered.push_back(*it);
      }
      seq.planes = std::move(ordered);
    }
    if (manifest.appearance_dim && seq.appearance_frames && seq.appearance_frames->cols() != *manifest.appearance_dim)
      throw DimensionMismatchError(where + "appearance dimension " + std::to_string(seq.appearance_frames->cols()) +
                                   " differs from the manifest's " + std::to_string(*manifest.appearance_dim));
    sequences.push_back(std::move(seq));
  }

  auto problems = validate_dataset(sequences);
  if (!problems.empty()) {
    std::string msg = manifest_path.string() + ": invalid dataset:";
    for (auto const & p : problems) msg += "\n  " + p;
    throw DataError(msg);
  }
  return sequences;
}

//============================================================================
// Writing
//============================================================================

void write_sequence(fs::path const & path, ActionSequence const & seq)
{
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());

  json header = {{"id", seq.id},
                 {"subject", seq.subject},
                 {"view", seq.view},
                 {"label", seq.label},
                 {"augmentation_group", seq.augmentation_group}};
  json planes = json::array();
  for (auto const & p : seq.planes) planes.push_back(plane_to_json(p));
  header["planes"] = std::move(planes);
  out << header.dump() << '\n';

  std::size_t const t_len = seq.length();
  for (std::size_t t = 0; t < t_len; ++t) {
    json rec = {{"t", t + 1}};
    if (t < seq.frames.size()) {
      json joints = json::array();
      for (auto const & j : seq.frames[t].joints) joints.push_back({j.x, j.y, j.z});
      rec["joints"] = std::move(joints);
    }
    if (seq.appearance_frames && t < seq.appearance_frames->rows()) {
      auto row = seq.appearance_frames->row(t);
      rec["appearance"] = std::vector<double>(row.begin(), row.end());
    }
    if (t < seq.depth_frames.size()) {
      auto const & d = seq.depth_frames[t];
      rec["depth"] = {{"width", d.width}, {"height", d.height}, {"values", d.values}};
    }
    out << rec.dump() << '\n';
  }
  if (!out) throw DataError("failed writing " + path.string());
}

fs::path save_dataset(fs::path const & dir, std::string const & manifest_name, std::string const & dataset_name,
                      std::span<const ActionSequence> sequences, std::vector<std::string> class_names)
{
  fs::create_directories(dir / "sequences");
  if (class_names.empty()) class_names = LabelMap::from_sequences(sequences).names();

  json manifest;
  manifest["name"] = dataset_name;
  std::size_t joints = 0;
  std::vector<std::string> plane_labels;
  std::optional<std::size_t> appearance_dim;
  for (auto const & s : sequences) {
    if (!s.frames.empty()) joints = s.frames.front().joints.size();
    if (plane_labels.empty())
      for (auto const & p : s.planes) plane_labels.push_back(p.label);
    if (s.appearance_frames) appearance_dim = s.appearance_frames->cols();
  }
  manifest["joint_count"] = joints;
  manifest["plane_labels"] = plane_labels;
  manifest["class_names"] = class_names;
  manifest["appearance_dim"] = appearance_dim ? json(*appearance_dim) : json(nullptr);

  json files = json::array();
  for (auto const & s : sequences) {
    std::string file = s.id;
    for (char & c : file)
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
    std::string const rel = "sequences/" + file + ".jsonl";
    write_sequence(dir / rel, s);
    files.push_back(rel);
  }
  manifest["sequences"] = std::move(files);

  fs::path const path = dir / manifest_name;
  std::ofstream out(path);
  out << manifest.dump(2) << '\n';
  if (!out) throw DataError("cannot write " + path.string());
  return path;
}

//============================================================================
// Config
//============================================================================

std::string config_to_json(KLRFConfig const & c, int indent)
{
  json j;
  j["num_trees"] = c.num_trees;
  j["eta_fraction"] = c.eta_fraction;
  j["candidates_per_node"] = c.candidates_per_node;
  j["min_samples_leaf"] = c.min_samples_leaf;
  j["qv_switch_prob"] = c.qv_switch_prob;
  j["kcf_bandwidth"] = c.kcf_bandwidth ? json(*c.kcf_bandwidth) : json("median");
  j["weight_clamp_epsilon"] = c.weight_clamp_epsilon;
  j["pyramid_levels"] = c.pyramid_levels;
  j["fourier_coeffs_per_segment"] = c.fourier_coeffs_per_segment;
  j["augmentation"] = {{"translations", c.augmentation.translations},
                       {"rotations", c.augmentation.rotations},
                       {"rotation_max_deg", c.augmentation.rotation_max_deg},
                       {"temporal_offsets", c.augmentation.temporal_offsets},
                       {"product", c.augmentation.product}};
  j["seed"] = c.seed;
  j["cross_view_mode"] = c.cross_view_mode;
  j["full_bag"] = c.full_bag;
  j["kinematic_gain"] =
      c.kinematic_gain == KLRFConfig::KinematicGain::Literal ? "literal" : "weighted_entropy";
  return j.dump(indent);
}

KLRFConfig config_from_json(std::string const & text)
{
  json j;
  try {
    j = json::parse(text);
  } catch (json::exception const & e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");

  KLRFConfig c;
  try {
    c.num_trees = j.value("num_trees", c.num_trees);
    c.eta_fraction = j.value("eta_fraction", c.eta_fraction);
    c.candidates_per_node = j.value("candidates_per_node", c.candidates_per_node);
    c.min_samples_leaf = j.value("min_samples_leaf", c.min_samples_leaf);
    c.qv_switch_prob = j.value("qv_switch_prob", c.qv_switch_prob);
    if (j.contains("kcf_bandwidth")) {
      auto const & bw = j.at("kcf_bandwidth");
      if (bw.is_string()) {
        if (bw.get<std::string>() != "median") throw ConfigError("config: kcf_bandwidth must be a number or \"median\"");
        c.kcf_bandwidth.reset();
      } else {
        c.kcf_bandwidth = bw.get<double>();
      }
    }
    c.weight_clamp_epsilon = j.value("weight_clamp_epsilon", c.weight_clamp_epsilon);
    c.pyramid_levels = j.value("pyramid_levels", c.pyramid_levels);
    c.fourier_coeffs_per_segment = j.value("fourier_coeffs_per_segment", c.fourier_coeffs_per_segment);
    if (j.contains("augmentation")) {
      auto const & a = j.at("augmentation");
      c.augmentation.translations = a.value("translations", c.augmentation.translations);
      c.augmentation.rotations = a.value("rotations", c.augmentation.rotations);
      c.augmentation.rotation_max_deg = a.value("rotation_max_deg", c.augmentation.rotation_max_deg);
      c.augmentation.temporal_offsets = a.value("temporal_offsets", c.augmentation.temporal_offsets);
      c.augmentation.product = a.value("product", c.augmentation.product);
    }
    c.seed = j.value("seed", c.seed);
    c.cross_view_mode = j.value("cross_view_mode", c.cross_view_mode);
    c.full_bag = j.value("full_bag", c.full_bag);
    if (j.contains("kinematic_gain")) {
      auto const rule = j.at("kinematic_gain").get<std::string>();
      if (rule == "literal") c.kinematic_gain = KLRFConfig::KinematicGain::Literal;
      else if (rule == "weighted_entropy") c.kinematic_gain = KLRFConfig::KinematicGain::WeightedEntropy;
      else throw ConfigError("config: kinematic_gain must be \"weighted_entropy\" or \"literal\"");
    }
  } catch (json::exception const & e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

KLRFConfig read_config(fs::path const & path)
{
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

} // namespace klrf::io
