#include "phaselab/config.hpp"

#include "phaselab/error.hpp"
#include "phaselab/rng.hpp"

#include <fstream>
#include <numbers>
#include <sstream>

namespace phaselab {

using nlohmann::json;

namespace {

std::string to_string(NormalizationMode m) { return m == NormalizationMode::Joint ? "joint" : "independent"; }

NormalizationMode parse_normalization(const std::string& s) {
  if (s == "independent") return NormalizationMode::Independent;
  if (s == "joint") return NormalizationMode::Joint;
  throw ConfigError("unknown normalization '" + s + "' (independent|joint)");
}

bool same_kind(const json& def, const json& v) {
  if (def.is_number_integer()) return v.is_number_integer();
  if (def.is_number()) return v.is_number();
  return def.type() == v.type();
}

std::string kind_name(const json& v) {
  if (v.is_number_integer()) return "integer";
  return v.is_number_float() ? "a number" : std::string(v.type_name());
}

void overlay(json& base, const json& user, const std::string& where) {
  if (!user.is_object()) throw ConfigError("config section '" + where + "' must be an object");
  for (const auto& [key, value] : user.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!base.contains(key)) throw ConfigError("unknown config key '" + path + "'");
    json& slot = base[key];
    if (slot.is_object()) {
      overlay(slot, value, path);
    } else {
      if (!same_kind(slot, value))
        throw ConfigError("config key '" + path + "' must be " + kind_name(slot) + ", got " + kind_name(value));
      slot = value;
    }
  }
}

template <typename T>
T get(const json& j, const char* key, const std::string& section) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + section + "." + key + "' has the wrong type");
  }
}

// Library enum parsers report std::invalid_argument; the CLI wants ConfigError.
template <typename F>
auto config_parse(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

std::vector<double> frequencies(const json& j, const char* key, const std::string& section) {
  return get<std::vector<double>>(j, key, section);
}

}  // namespace

json default_config_json() {
  const ExperimentConfig d;
  const TrainConfig& t = d.training;
  const OptimizerOpts& o = d.probe.opts;
  json j;
  j["schema"] = config_schema;
  j["seed"] = d.seed;
  j["output"] = d.output.string();
  j["weights"] = "";
  j["dataset"] = {{"path", ""},
                  {"images", ""},
                  {"train", d.manifest.counts.train},
                  {"val", d.manifest.counts.val},
                  {"test", d.manifest.counts.test},
                  {"phase_max", d.manifest.phase_max}};
  j["optics"] = {{"wavelength", d.optics.wavelength},
                 {"distance", d.optics.distance},
                 {"pitch", d.optics.pitch},
                 {"grid", d.optics.grid}};
  j["measurement"] = {{"photon_level", d.measurement.photon_level},
                      {"read_sigma", d.measurement.read_sigma},
                      {"clamp", d.measurement.clamp}};
  j["approximant"] = {{"iterations", d.approximant_iterations}};
  j["training"] = {{"epochs", t.epochs},
                   {"batch_size", t.batch_size},
                   {"learning_rate", t.learning_rate},
                   {"beta1", t.beta1},
                   {"beta2", t.beta2},
                   {"epsilon", t.epsilon},
                   {"depth", t.arch.depth},
                   {"width", t.arch.width},
                   {"residual", t.arch.residual},
                   {"normalization", to_string(t.normalization)}};
  json dirs = json::array();
  for (Direction dir : d.scan_directions) dirs.push_back(to_string(dir));
  j["scan"] = {{"directions", dirs},
               {"nus", json::array()},
               {"amplitude", d.scan.amplitude},
               {"convention", to_string(d.scan.convention)},
               {"phase_mode", to_string(d.scan.phase_mode)},
               {"normalization", to_string(d.scan.normalization)},
               {"examples", d.scan_examples}};
  j["probe"] = {{"direction", to_string(d.probe.direction)},
                {"nus", json::array()},
                {"nu", d.probe_nu},
                {"amplitude", d.probe.amplitude},
                {"convention", to_string(d.probe.convention)},
                {"phase_mode", to_string(d.probe.phase_mode)},
                {"examples", d.probe_examples},
                {"step", o.step},
                {"max_iters", o.max_iters},
                {"tolerance", o.tolerance},
                {"armijo", o.armijo},
                {"shrink", o.shrink},
                {"max_backtracks", o.max_backtracks}};
  j["map"] = {{"iterations", d.map.iterations}, {"step", d.map.step}, {"tolerance", d.map.tolerance}};
  j["psd"] = {{"averaging", to_string(d.psd_averaging)}};
  j["calibration"] = {{"degree", d.calibration_degree}};
  j["sweep"] = {{"photon_levels", d.photon_levels}};
  return j;
}

json merge_config(const json& user, json base) {
  json merged = std::move(base);
  if (user.is_null()) return merged;
  if (!user.is_object()) throw ConfigError("config must be a JSON object");
  if (user.contains("schema") && user["schema"] != config_schema)
    throw ConfigError("unsupported config schema " + user["schema"].dump() + " (expected \"" + config_schema + "\")");
  overlay(merged, user, "");
  return merged;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json patch = value;
  std::string rest = path;
  std::vector<std::string> keys;
  for (std::size_t start = 0;;) {
    const auto dot = rest.find('.', start);
    keys.push_back(rest.substr(start, dot == std::string::npos ? std::string::npos : dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  for (auto it = keys.rbegin(); it != keys.rend(); ++it) {
    if (it->empty()) throw ConfigError("override path '" + path + "' has an empty component");
    patch = json{{*it, patch}};
  }
  // A leaf that is itself an object cannot be replaced wholesale.
  const json* leaf = &doc;
  for (const auto& k : keys) {
    if (!leaf->is_object() || !leaf->contains(k)) throw ConfigError("unknown config key '" + path + "'");
    leaf = &(*leaf)[k];
  }
  if (leaf->is_object()) throw ConfigError("override '" + path + "' names a section, not a value");
  overlay(doc, patch, "");
}

ExperimentConfig parse_config(const json& m) {
  ExperimentConfig c;
  c.seed = get<std::uint64_t>(m, "seed", "");
  c.output = get<std::string>(m, "output", "");
  c.weights = get<std::string>(m, "weights", "");
  if (c.output.empty()) throw ConfigError("output directory must not be empty");

  const json& ds = m.at("dataset");
  c.dataset_dir = get<std::string>(ds, "path", "dataset");
  c.images = get<std::string>(ds, "images", "dataset");
  if (!c.dataset_dir.empty() && !c.images.empty()) throw ConfigError("dataset.path and dataset.images are exclusive");

  const json& op = m.at("optics");
  c.optics.wavelength = get<double>(op, "wavelength", "optics");
  c.optics.distance = get<double>(op, "distance", "optics");
  c.optics.pitch = get<double>(op, "pitch", "optics");
  c.optics.grid = get<Index>(op, "grid", "optics");
  config_parse([&] { c.optics.validate(); });

  const json& ms = m.at("measurement");
  c.measurement.photon_level = get<double>(ms, "photon_level", "measurement");
  c.measurement.read_sigma = get<double>(ms, "read_sigma", "measurement");
  c.measurement.clamp = get<bool>(ms, "clamp", "measurement");
  c.measurement.seed = derive_seed(c.seed, "measure");
  if (!(c.measurement.read_sigma >= 0.0)) throw ConfigError("measurement.read_sigma must be non-negative");

  c.manifest.source = c.images.empty() ? "synthetic" : c.images.string();
  c.manifest.counts = {get<std::size_t>(ds, "train", "dataset"), get<std::size_t>(ds, "val", "dataset"),
                       get<std::size_t>(ds, "test", "dataset")};
  c.manifest.grid = c.optics.grid;
  c.manifest.phase_max = get<double>(ds, "phase_max", "dataset");
  c.manifest.photon_level = c.measurement.photon_level;
  c.manifest.seed = c.seed;
  c.manifest.validate();

  c.approximant_iterations = get<int>(m.at("approximant"), "iterations", "approximant");
  if (c.approximant_iterations < 1) throw ConfigError("approximant.iterations must be at least 1");

  const json& tr = m.at("training");
  TrainConfig& t = c.training;
  t.epochs = get<int>(tr, "epochs", "training");
  t.batch_size = get<std::size_t>(tr, "batch_size", "training");
  t.learning_rate = get<double>(tr, "learning_rate", "training");
  t.beta1 = get<double>(tr, "beta1", "training");
  t.beta2 = get<double>(tr, "beta2", "training");
  t.epsilon = get<double>(tr, "epsilon", "training");
  t.arch.depth = get<int>(tr, "depth", "training");
  t.arch.width = get<int>(tr, "width", "training");
  t.arch.residual = get<bool>(tr, "residual", "training");
  t.normalization = parse_normalization(get<std::string>(tr, "normalization", "training"));
  t.seed = derive_seed(c.seed, "train");
  t.validate();

  const json& sc = m.at("scan");
  c.scan_directions.clear();
  for (const auto& s : get<std::vector<std::string>>(sc, "directions", "scan"))
    c.scan_directions.push_back(config_parse([&] { return parse_direction(s); }));
  if (c.scan_directions.empty()) throw ConfigError("scan.directions must not be empty");
  c.scan.nus = frequencies(sc, "nus", "scan");
  c.scan.amplitude = get<double>(sc, "amplitude", "scan");
  c.scan.convention = config_parse([&] { return parse_amplitude_convention(get<std::string>(sc, "convention", "scan")); });
  c.scan.phase_mode = config_parse([&] { return parse_phase_mode(get<std::string>(sc, "phase_mode", "scan")); });
  c.scan.normalization = parse_normalization(get<std::string>(sc, "normalization", "scan"));
  c.scan.seed = derive_seed(c.seed, "scan");
  c.scan_examples = get<std::size_t>(sc, "examples", "scan");
  if (!(c.scan.amplitude >= 0.0)) throw ConfigError("scan.amplitude must be non-negative");
  if (c.scan_examples == 0) throw ConfigError("scan.examples must be positive");

  const json& pr = m.at("probe");
  SuppressionConfig& p = c.probe;
  p.direction = config_parse([&] { return parse_direction(get<std::string>(pr, "direction", "probe")); });
  p.nus = frequencies(pr, "nus", "probe");
  p.amplitude = get<double>(pr, "amplitude", "probe");
  p.convention = config_parse([&] { return parse_amplitude_convention(get<std::string>(pr, "convention", "probe")); });
  p.phase_mode = config_parse([&] { return parse_phase_mode(get<std::string>(pr, "phase_mode", "probe")); });
  p.seed = derive_seed(c.seed, "probe");
  p.opts.step = get<double>(pr, "step", "probe");
  p.opts.max_iters = get<int>(pr, "max_iters", "probe");
  p.opts.tolerance = get<double>(pr, "tolerance", "probe");
  p.opts.armijo = get<double>(pr, "armijo", "probe");
  p.opts.shrink = get<double>(pr, "shrink", "probe");
  p.opts.max_backtracks = get<int>(pr, "max_backtracks", "probe");
  p.opts.validate();
  c.probe_examples = get<std::size_t>(pr, "examples", "probe");
  c.probe_nu = get<double>(pr, "nu", "probe");
  if (!(p.amplitude >= 0.0)) throw ConfigError("probe.amplitude must be non-negative");
  if (c.probe_examples == 0) throw ConfigError("probe.examples must be positive");
  if (!(c.probe_nu > 0.0 && c.probe_nu <= 0.5)) throw ConfigError("probe.nu must lie in (0, 0.5]");

  const json& mp = m.at("map");
  c.map.iterations = get<int>(mp, "iterations", "map");
  c.map.step = get<double>(mp, "step", "map");
  c.map.tolerance = get<double>(mp, "tolerance", "map");
  if (c.map.iterations < 1 || !(c.map.step > 0.0)) throw ConfigError("map.iterations and map.step must be positive");

  c.psd_averaging =
      config_parse([&] { return parse_psd_averaging(get<std::string>(m.at("psd"), "averaging", "psd")); });

  c.calibration_degree = get<int>(m.at("calibration"), "degree", "calibration");
  if (c.calibration_degree < 1 || c.calibration_degree > 12) throw ConfigError("calibration.degree must lie in [1, 12]");

  c.photon_levels = get<std::vector<double>>(m.at("sweep"), "photon_levels", "sweep");
  if (c.photon_levels.empty()) throw ConfigError("sweep.photon_levels must not be empty");
  for (double v : c.photon_levels)
    if (!(v > 0.0)) throw ConfigError("sweep.photon_levels must be positive");
  return c;
}

std::string config_hash(const json& doc) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : doc.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

json read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  json user = json::parse(in, nullptr, false);
  if (user.is_discarded()) throw ConfigError("config " + path.string() + " is not valid JSON");
  return user;
}

}  // namespace phaselab
