#include "edecoh/config.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <type_traits>

#include "edecoh/errors.hpp"
#include "edecoh/image_io.hpp"
#include "json.hpp"

namespace edecoh {

using nlohmann::json;

namespace {

// Reads keys of one JSON object and rejects anything it was not asked for.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  const json& raw(const char* key) {
    used_.insert(key);
    return j_.at(key);
  }

  void number(const char* key, double& out) {
    if (!take(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(where(key) + " must be a number");
    out = v.get<double>();
  }

  void optional_number(const char* key, std::optional<double>& out) {
    if (!take(key)) return;
    const json& v = j_.at(key);
    if (v.is_null()) {
      out.reset();
      return;
    }
    if (!v.is_number()) throw ConfigError(where(key) + " must be a number or null");
    out = v.get<double>();
  }

  template <class Int>
  void integer(const char* key, Int& out) {
    if (!take(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) throw ConfigError(where(key) + " must be an integer");
    if constexpr (std::is_unsigned_v<Int>) {
      if (v.is_number_unsigned()) {
        out = static_cast<Int>(v.get<std::uint64_t>());
        return;
      }
      if (v.get<std::int64_t>() < 0) throw ConfigError(where(key) + " must be >= 0");
    }
    out = static_cast<Int>(v.get<std::int64_t>());
  }

  void boolean(const char* key, bool& out) {
    if (!take(key)) return;
    const json& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(where(key) + " must be true or false");
    out = v.get<bool>();
  }

  void string(const char* key, std::string& out) {
    if (!take(key)) return;
    const json& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(where(key) + " must be a string");
    out = v.get<std::string>();
  }

  template <class Enum>
  void choice(const char* key, Enum& out,
              std::initializer_list<std::pair<const char*, Enum>> options) {
    std::string text;
    string(key, text);
    if (text.empty() && !j_.contains(key)) return;
    std::string allowed;
    for (const auto& [name, value] : options) {
      if (text == name) {
        out = value;
        return;
      }
      allowed += (allowed.empty() ? "" : "|") + std::string(name);
    }
    throw ConfigError(where(key) + " must be one of " + allowed + ", got '" + text + "'");
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!used_.count(key)) throw ConfigError("unknown key '" + where(key.c_str()) + "'");
  }

  std::string where(const char* key = nullptr) const {
    if (!key) return path_.empty() ? "config" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  bool take(const char* key) {
    if (!j_.contains(key)) return false;
    used_.insert(key);
    return true;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

void read_beam(Reader r, BeamSpec& b) {
  r.number("kinetic_energy_ev", b.kinetic_energy_ev);
  r.number("divergence_x_rad", b.divergence_x);
  r.number("divergence_y_rad", b.divergence_y);
  r.optional_number("coherence_width_m", b.coherence_width);
  r.number("spatial_width_m", b.spatial_width);
  r.finish();
}

void read_geometry(Reader r, ScenarioConfig& c) {
  auto& g = c.geometry;
  r.number("slit_separation_m", g.slit_separation);
  r.number("grating_to_surface_m", g.grating_to_surface);
  r.number("surface_length_m", g.surface_length);
  r.number("grating_to_detector_m", g.grating_to_detector);
  r.optional_number("surface_height_m", g.surface_height);
  r.optional_number("beam_height_m", g.beam_height);
  r.number("detector_bin_width_m", g.detector_bin_width);
  r.boolean("surface_present", c.surface_present);
  r.boolean("image_charge", c.image_charge);
  r.number("transmitted_fraction", c.transmitted_fraction);
  r.finish();
}

void read_grating(Reader r, ScenarioConfig& c) {
  r.number("period_m", c.grating.period);
  r.number("open_fraction", c.grating.open_fraction);
  r.integer("min_points_per_period", c.grating.min_points_per_period);
  r.optional_number("camera_length_m", c.camera_length);
  r.finish();
}

void read_material(Reader r, ScenarioConfig& c) {
  auto& m = c.material;
  r.string("label", m.label);
  r.number("resistivity_ohm_m", m.resistivity);
  r.number("temperature_k", m.temperature);
  r.optional_number("fermi_wavevector_per_m", m.fermi_wavevector);
  if (r.has("resistivity_band_ohm_m")) {
    const json& band = r.raw("resistivity_band_ohm_m");
    if (band.is_null()) {
      c.resistivity_band.reset();
    } else {
      require(band.is_array() && band.size() == 2 && band[0].is_number() && band[1].is_number(),
              r.where("resistivity_band_ohm_m") + " must be [min, max] or null");
      c.resistivity_band = std::pair{band[0].get<double>(), band[1].get<double>()};
    }
  }
  r.finish();
}

void read_model(Reader r, ScenarioConfig& c) {
  std::string id;
  r.string("id", id);
  if (!id.empty()) c.model = parse_model_id(id);
  auto& o = c.model_options;
  r.choice("buhmann_sign", o.buhmann_sign,
           {{"plus", BuhmannSign::Plus}, {"as_printed", BuhmannSign::AsPrinted}});
  r.choice("buhmann_units", o.buhmann_units,
           {{"consistent", PrefactorUnits::Consistent}, {"as_printed", PrefactorUnits::AsPrinted}});
  r.choice("machnikowski_units", o.machnikowski_units,
           {{"consistent", PrefactorUnits::Consistent}, {"as_printed", PrefactorUnits::AsPrinted}});
  r.choice("howie_eta", o.howie_eta,
           {{"y_over_4dx", HowieEta::QuarterRatio}, {"4y_over_dx", HowieEta::FourRatio}});
  r.finish();
}

void read_bins(Reader r, BinSpec& b) {
  r.number("y_min_m", b.y_min);
  r.number("y_max_m", b.y_max);
  r.integer("count", b.count);
  r.number("reference_dx_m", b.reference_dx);
  r.finish();
}

void read_numerics(Reader r, NumericsSpec& n) {
  auto& coh = n.coherence;
  r.integer("trajectories", n.trajectories);
  r.integer("seed", n.seed);
  r.integer("integrator_steps", n.integrator.steps);
  r.integer("record_samples", n.integrator.record_samples);
  r.number("energy_tolerance", n.integrator.energy_tolerance);
  r.integer("sum_points", coh.grid.sum_points);
  r.integer("diff_points", coh.grid.diff_points);
  r.integer("n_states", coh.n_states);
  r.boolean("auto_states", coh.auto_states);
  r.number("reconstruction_tolerance", coh.reconstruction_tolerance);
  r.integer("max_bin_trajectories", coh.max_bin_trajectories);
  r.choice("gamma_averaging", coh.averaging,
           {{"mean_gamma", GammaAveraging::MeanGamma},
            {"mean_exponent", GammaAveraging::MeanExponent}});
  r.number("diff_cutoff", coh.diff_cutoff);
  r.integer("points_per_period", coh.far_field.points_per_period);
  r.number("span_factor", coh.far_field.span_factor);
  r.number("edge_tolerance", coh.far_field.edge_tolerance);
  r.integer("fit_n_max", n.fit_n_max);
  r.boolean("global_spacing", n.global_spacing);
  r.finish();
}

void read_outputs(Reader r, OutputSpec& o) {
  r.string("directory", o.directory);
  if (r.has("formats")) {
    const json& f = r.raw("formats");
    require(f.is_array(), r.where("formats") + " must be an array");
    o.csv = o.json = o.svg = false;
    for (const auto& item : f) {
      require(item.is_string(), r.where("formats") + " entries must be strings");
      const auto s = item.get<std::string>();
      if (s == "csv") o.csv = true;
      else if (s == "json") o.json = true;
      else if (s == "svg") o.svg = true;
      else throw ConfigError(r.where("formats") + ": unknown format '" + s + "' (csv|json|svg)");
    }
  }
  r.boolean("trajectory_csv", o.trajectory_csv);
  r.finish();
}

json to_json(const ScenarioConfig& c, bool with_outputs) {
  const auto& b = c.beam;
  const auto& g = c.geometry;
  const auto& n = c.numerics;
  const auto& coh = n.coherence;
  json j;
  j["name"] = c.name;
  j["beam"] = {{"kinetic_energy_ev", b.kinetic_energy_ev},
               {"divergence_x_rad", b.divergence_x},
               {"divergence_y_rad", b.divergence_y},
               {"coherence_width_m", optional_json(b.coherence_width)},
               {"spatial_width_m", b.spatial_width}};
  j["geometry"] = {{"slit_separation_m", g.slit_separation},
                   {"grating_to_surface_m", g.grating_to_surface},
                   {"surface_length_m", g.surface_length},
                   {"grating_to_detector_m", g.grating_to_detector},
                   {"surface_height_m", optional_json(g.surface_height)},
                   {"beam_height_m", optional_json(g.beam_height)},
                   {"detector_bin_width_m", g.detector_bin_width},
                   {"surface_present", c.surface_present},
                   {"image_charge", c.image_charge},
                   {"transmitted_fraction", c.transmitted_fraction}};
  j["grating"] = {{"period_m", c.grating.period},
                  {"open_fraction", c.grating.open_fraction},
                  {"min_points_per_period", c.grating.min_points_per_period},
                  {"camera_length_m", optional_json(c.camera_length)}};
  j["material"] = {{"label", c.material.label},
                   {"resistivity_ohm_m", c.material.resistivity},
                   {"temperature_k", c.material.temperature},
                   {"fermi_wavevector_per_m", optional_json(c.material.fermi_wavevector)},
                   {"resistivity_band_ohm_m",
                    c.resistivity_band
                        ? json::array({c.resistivity_band->first, c.resistivity_band->second})
                        : json(nullptr)}};
  const auto& o = c.model_options;
  j["model"] = {
      {"id", std::string(to_string(c.model))},
      {"buhmann_sign", o.buhmann_sign == BuhmannSign::Plus ? "plus" : "as_printed"},
      {"buhmann_units", o.buhmann_units == PrefactorUnits::Consistent ? "consistent" : "as_printed"},
      {"machnikowski_units",
       o.machnikowski_units == PrefactorUnits::Consistent ? "consistent" : "as_printed"},
      {"howie_eta", o.howie_eta == HowieEta::QuarterRatio ? "y_over_4dx" : "4y_over_dx"}};
  j["bins"] = {{"y_min_m", c.bins.y_min},
               {"y_max_m", c.bins.y_max},
               {"count", c.bins.count},
               {"reference_dx_m", c.bins.reference_dx}};
  j["numerics"] = {
      {"trajectories", n.trajectories},
      {"seed", n.seed},
      {"integrator_steps", n.integrator.steps},
      {"record_samples", n.integrator.record_samples},
      {"energy_tolerance", n.integrator.energy_tolerance},
      {"sum_points", coh.grid.sum_points},
      {"diff_points", coh.grid.diff_points},
      {"n_states", coh.n_states},
      {"auto_states", coh.auto_states},
      {"reconstruction_tolerance", coh.reconstruction_tolerance},
      {"max_bin_trajectories", coh.max_bin_trajectories},
      {"gamma_averaging",
       coh.averaging == GammaAveraging::MeanGamma ? "mean_gamma" : "mean_exponent"},
      {"diff_cutoff", coh.diff_cutoff},
      {"points_per_period", coh.far_field.points_per_period},
      {"span_factor", coh.far_field.span_factor},
      {"edge_tolerance", coh.far_field.edge_tolerance},
      {"fit_n_max", n.fit_n_max},
      {"global_spacing", n.global_spacing}};
  if (with_outputs) {
    json formats = json::array();
    if (c.outputs.csv) formats.push_back("csv");
    if (c.outputs.json) formats.push_back("json");
    if (c.outputs.svg) formats.push_back("svg");
    j["outputs"] = {{"directory", c.outputs.directory},
                    {"formats", formats},
                    {"trajectory_csv", c.outputs.trajectory_csv}};
  }
  return j;
}

}  // namespace

std::vector<double> BinSpec::centers() const {
  std::vector<double> out;
  if (count == 1) return {y_min};
  for (int i = 0; i < count; ++i) out.push_back(y_min + (y_max - y_min) * i / (count - 1));
  return out;
}

void ScenarioConfig::validate() const {
  beam.validate();
  geometry.validate();
  material.validate();
  grating.validate();
  require(transmitted_fraction > 0.0 && transmitted_fraction <= 1.0,
          "geometry.transmitted_fraction must be in (0, 1]");
  require(!camera_length || *camera_length > 0.0, "grating.camera_length_m must be > 0");
  require(bins.count >= 1, "bins.count must be >= 1");
  require(bins.y_max >= bins.y_min, "bins.y_max_m must be >= bins.y_min_m");
  require(bins.reference_dx > 0.0, "bins.reference_dx_m must be > 0");
  if (resistivity_band)
    require(resistivity_band->first > 0.0 && resistivity_band->second >= resistivity_band->first,
            "material.resistivity_band_ohm_m must satisfy 0 < min <= max");
  if (model == ModelId::Machnikowski && !material.fermi_wavevector)
    throw ConfigError("model machnikowski needs material.fermi_wavevector_per_m");
  const auto& n = numerics;
  require(n.trajectories >= 1, "numerics.trajectories must be >= 1");
  require(n.integrator.steps >= 1, "numerics.integrator_steps must be >= 1");
  require(n.integrator.record_samples >= 2, "numerics.record_samples must be >= 2");
  require(n.integrator.energy_tolerance > 0.0, "numerics.energy_tolerance must be > 0");
  const auto& coh = n.coherence;
  require(coh.grid.sum_points >= 3 && coh.grid.sum_points % 2 == 1,
          "numerics.sum_points must be odd and >= 3");
  require(coh.grid.diff_points >= 3 && coh.grid.diff_points % 2 == 1,
          "numerics.diff_points must be odd and >= 3");
  require(coh.n_states >= 1, "numerics.n_states must be >= 1");
  require(coh.reconstruction_tolerance > 0.0, "numerics.reconstruction_tolerance must be > 0");
  require(coh.max_bin_trajectories >= 1, "numerics.max_bin_trajectories must be >= 1");
  require(coh.diff_cutoff > 0.0, "numerics.diff_cutoff must be > 0");
  require(coh.far_field.points_per_period >= grating.min_points_per_period,
          "numerics.points_per_period must be >= grating.min_points_per_period");
  require(coh.far_field.span_factor > 0.0, "numerics.span_factor must be > 0");
  require(coh.far_field.edge_tolerance > 0.0, "numerics.edge_tolerance must be > 0");
  require(n.fit_n_max >= 1, "numerics.fit_n_max must be >= 1");
}

ScenarioConfig preset_config(const std::string& name) {
  ScenarioConfig c;
  if (name == "silicon") {
    c.name = "silicon";
    c.material = MaterialSpec::silicon(10.0);
    c.resistivity_band = std::pair{0.01, 0.2};
    c.model = ModelId::Zurek;
  } else if (name == "gold") {
    c.name = "gold";
    c.material = MaterialSpec::gold();
    c.model = ModelId::Howie;
  } else if (name == "baseline") {
    c.name = "baseline";
    c.surface_present = false;
    c.model = ModelId::None;
  } else {
    throw ConfigError("unknown preset '" + name + "' (silicon|gold|baseline)");
  }
  return c;
}

ScenarioConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  // A run manifest carries the resolved config under "config".
  if (root.is_object() && root.contains("manifest_version")) {
    if (!root.contains("config")) throw ConfigError("manifest has no config section");
    root = root.at("config");
  }
  Reader r(root, "");
  ScenarioConfig c;
  std::string preset;
  r.string("preset", preset);
  if (!preset.empty()) c = preset_config(preset);
  try {
    r.string("name", c.name);
    if (r.has("beam")) read_beam(Reader(r.raw("beam"), "beam"), c.beam);
    if (r.has("geometry")) read_geometry(Reader(r.raw("geometry"), "geometry"), c);
    if (r.has("grating")) read_grating(Reader(r.raw("grating"), "grating"), c);
    if (r.has("material")) read_material(Reader(r.raw("material"), "material"), c);
    if (r.has("model")) read_model(Reader(r.raw("model"), "model"), c);
    if (r.has("bins")) read_bins(Reader(r.raw("bins"), "bins"), c.bins);
    if (r.has("numerics")) read_numerics(Reader(r.raw("numerics"), "numerics"), c.numerics);
    if (r.has("outputs")) read_outputs(Reader(r.raw("outputs"), "outputs"), c.outputs);
    r.finish();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_text_file(path));
}

std::string config_to_json(const ScenarioConfig& config, int indent) {
  return to_json(config, true).dump(indent);
}

std::string config_hash(const ScenarioConfig& config) {
  // Output locations do not change results and are left out.
  const std::string text = to_json(config, false).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace edecoh
