#include "ruinsim/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace ruinsim {

using nlohmann::json;

namespace {

// Walks one JSON object, checking types and remembering which keys were read
// so that leftovers can be rejected as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw SchemaError(path_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const json& require(const std::string& key) {
    const json* v = get(key);
    if (!v) throw SchemaError(field(key) + ": required field missing");
    return *v;
  }

  void number(const std::string& key, double& out) {
    if (const json* v = get(key)) out = as_number(*v, field(key));
  }

  template <class U>
  void count(const std::string& key, U& out) {
    if (const json* v = get(key)) out = static_cast<U>(as_unsigned(*v, field(key)));
  }

  void boolean(const std::string& key, bool& out) {
    if (const json* v = get(key)) {
      if (!v->is_boolean()) throw SchemaError(field(key) + ": expected a boolean");
      out = v->get<bool>();
    }
  }

  void string(const std::string& key, std::string& out) {
    if (const json* v = get(key)) {
      if (!v->is_string()) throw SchemaError(field(key) + ": expected a string");
      out = v->get<std::string>();
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw SchemaError(field(it.key()) + ": unknown key");
  }

  static double as_number(const json& v, const std::string& where) {
    if (!v.is_number()) throw SchemaError(where + ": expected a number");
    return v.get<double>();
  }

  static std::uint64_t as_unsigned(const json& v, const std::string& where) {
    if (!v.is_number_unsigned()) throw SchemaError(where + ": expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

  static Vec as_vector(const json& v, const std::string& where) {
    if (!v.is_array()) throw SchemaError(where + ": expected an array of numbers");
    Vec out;
    for (std::size_t i = 0; i < v.size(); ++i)
      out.push_back(as_number(v[i], where + "[" + std::to_string(i) + "]"));
    return out;
  }

  static std::vector<Vec> as_matrix(const json& v, const std::string& where) {
    if (!v.is_array()) throw SchemaError(where + ": expected an array of arrays");
    std::vector<Vec> out;
    for (std::size_t i = 0; i < v.size(); ++i)
      out.push_back(as_vector(v[i], where + "[" + std::to_string(i) + "]"));
    return out;
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

// Parses while rejecting duplicate keys, which nlohmann would silently
// overwrite.
json parse_strict(const std::string& text) {
  struct Frame {
    std::set<std::string> keys;
    std::string name;
  };
  std::vector<Frame> stack;
  std::string last_key;
  auto cb = [&](int, json::parse_event_t event, json& parsed) {
    switch (event) {
      case json::parse_event_t::object_start:
        stack.push_back({{}, stack.empty() ? std::string() : last_key});
        break;
      case json::parse_event_t::object_end:
        if (!stack.empty()) stack.pop_back();
        break;
      case json::parse_event_t::key: {
        last_key = parsed.get<std::string>();
        auto& frame = stack.back();
        if (!frame.keys.insert(last_key).second) {
          const std::string where = frame.name.empty() ? last_key : frame.name + "." + last_key;
          throw SchemaError(where + ": duplicate key");
        }
        break;
      }
      default:
        break;
    }
    return true;
  };
  try {
    return json::parse(text, cb);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed JSON: ") + e.what());
  }
}

const char* strategy_name(const std::optional<ValueStrategy>& s) {
  if (!s) return "auto";
  return *s == ValueStrategy::ExactRadial ? "exact" : "asymptotic";
}

const char* crude_target_name(StopTarget t) {
  return t == StopTarget::Enlarged ? "enlarged" : "star";
}

void check(bool ok, const std::string& message) {
  if (!ok) throw ValidationError(message);
}

}  // namespace

IncrementModel ModelConfig::build() const {
  return IncrementModel(alpha, xm, SpectralMeasure(atoms), body_radius);
}

TargetSpec TargetConfig::build() const {
  return normalize_target(directions, offsets, delta, beta, gamma);
}

MixtureKernel RunConfig::kernel_at(double b) const {
  return MixtureKernel(model.build(), target, b, kernel, value_strategy);
}

std::vector<double> RunConfig::scales() const {
  return sim.b_list.empty() ? std::vector<double>{sim.b} : sim.b_list;
}

RunConfig parse_config(const std::string& text) {
  const json root = parse_strict(text);
  RunConfig cfg;
  Section top(root, "");

  {
    Section s(top.require("model"), "model");
    s.number("alpha", cfg.model.alpha);
    s.number("xm", cfg.model.xm);
    s.number("body_radius", cfg.model.body_radius);
    const json& atoms = s.require("atoms");
    if (!atoms.is_array() || atoms.empty())
      throw SchemaError("model.atoms: expected a non-empty array");
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      Section a(atoms[i], "model.atoms[" + std::to_string(i) + "]");
      SpectralAtom atom;
      atom.dir = Section::as_vector(a.require("dir"), a.field("dir"));
      atom.weight = 1.0;
      a.number("weight", atom.weight);
      a.finish();
      cfg.model.atoms.push_back(std::move(atom));
    }
    s.finish();
  }
  const IncrementModel model = cfg.model.build();

  {
    Section s(top.require("target"), "target");
    cfg.target_input.directions = Section::as_matrix(s.require("directions"), "target.directions");
    cfg.target_input.offsets = Section::as_vector(s.require("offsets"), "target.offsets");
    s.number("delta", cfg.target_input.delta);
    s.number("beta", cfg.target_input.beta);
    s.number("gamma", cfg.target_input.gamma);
    s.finish();
    check(!cfg.target_input.directions.empty() &&
              cfg.target_input.directions.front().size() == model.dim(),
          "target.directions must match the model dimension " + std::to_string(model.dim()));
    cfg.target = cfg.target_input.build();
    cfg.target_input.beta = cfg.target.beta;
  }
  const double min_a = *std::min_element(cfg.target.astar.begin(), cfg.target.astar.end());
  cfg.kernel.delta2 = 0.1 * min_a;

  if (top.has("kernel")) {
    Section s(*top.get("kernel"), "kernel");
    s.number("theta", cfg.kernel.theta);
    s.number("a", cfg.kernel.a);
    s.number("delta2", cfg.kernel.delta2);
    s.number("max_step_factor", cfg.kernel.max_step_factor);
    std::string strategy = "auto";
    s.string("value_strategy", strategy);
    if (strategy == "exact")
      cfg.value_strategy = ValueStrategy::ExactRadial;
    else if (strategy == "asymptotic")
      cfg.value_strategy = ValueStrategy::AsymptoticKappa;
    else if (strategy != "auto")
      throw SchemaError("kernel.value_strategy: expected \"auto\", \"exact\" or \"asymptotic\"");
    s.finish();
  }
  top.get("kernel");
  cfg.kernel.validate(enlarge(cfg.target));
  check(cfg.value_strategy != ValueStrategy::ExactRadial || model.pure_radial(),
        "kernel.value_strategy \"exact\" requires body_radius = 0");

  bool have_c1 = false, have_theta = false;
  if (top.has("mollifier")) {
    Section s(*top.get("mollifier"), "mollifier");
    s.number("c0_tilde", cfg.mollifier.c0_tilde);
    s.number("delta0", cfg.mollifier.delta0);
    s.number("epsilon", cfg.mollifier.epsilon);
    have_c1 = s.has("c1");
    s.number("c1", cfg.mollifier.c1);
    s.finish();
  }
  top.get("mollifier");
  check(cfg.mollifier.epsilon > 0.0, "mollifier.epsilon must be positive");
  const TunedConstants tuned = tuned_constants(cfg.mollifier.epsilon);
  if (!have_c1) cfg.mollifier.c1 = tuned.c1;
  cfg.mollifier.params().validate();

  if (top.has("sim")) {
    Section s(*top.get("sim"), "sim");
    s.number("b", cfg.sim.b);
    if (const json* v = s.get("b_list")) cfg.sim.b_list = Section::as_vector(*v, "sim.b_list");
    s.count("n_paths", cfg.sim.n_paths);
    s.count("seed", cfg.sim.seed);
    s.count("workers", cfg.sim.workers);
    s.string("output_dir", cfg.sim.output_dir);
    s.boolean("per_path_csv", cfg.sim.per_path_csv);
    s.finish();
  }
  top.get("sim");
  check(cfg.sim.b > 0.0, "sim.b must be positive");
  for (double b : cfg.sim.b_list) check(b > 0.0, "sim.b_list entries must be positive");
  check(cfg.sim.n_paths > 0, "sim.n_paths must be positive");
  check(cfg.sim.workers > 0, "sim.workers must be positive");

  if (top.has("lyapunov")) {
    Section s(*top.get("lyapunov"), "lyapunov");
    if (const json* v = s.get("states")) cfg.lyapunov.states = Section::as_matrix(*v, "lyapunov.states");
    s.count("n_mc", cfg.lyapunov.n_mc);
    have_theta = s.has("theta");
    s.number("theta", cfg.lyapunov.theta);
    s.finish();
  }
  top.get("lyapunov");
  if (!have_theta) cfg.lyapunov.theta = tuned.theta;
  check(cfg.lyapunov.n_mc >= 2, "lyapunov.n_mc must be at least 2");
  check(cfg.lyapunov.theta > 0.0 && cfg.lyapunov.theta < 1.0, "lyapunov.theta must lie in (0, 1)");
  for (const auto& st : cfg.lyapunov.states)
    check(st.size() == model.dim(), "lyapunov.states must match the model dimension");

  if (top.has("limits")) {
    Section s(*top.get("limits"), "limits");
    s.number("level", cfg.limits.level);
    s.number("u", cfg.limits.u);
    s.number("lln_eps", cfg.limits.lln_eps);
    s.number("lln_max_fraction", cfg.limits.lln_max_fraction);
    s.count("min_paths", cfg.limits.min_paths);
    s.finish();
  }
  top.get("limits");
  check(cfg.limits.level > 0.0 && cfg.limits.level < 1.0, "limits.level must lie in (0, 1)");
  check(cfg.limits.u > 0.0 && cfg.limits.u <= 1.0, "limits.u must lie in (0, 1]");
  check(cfg.limits.lln_eps > 0.0, "limits.lln_eps must be positive");
  check(cfg.limits.lln_max_fraction >= 0.0 && cfg.limits.lln_max_fraction <= 1.0,
        "limits.lln_max_fraction must lie in [0, 1]");
  cfg.limits.seed = cfg.sim.seed;

  if (top.has("crude")) {
    Section s(*top.get("crude"), "crude");
    s.count("n_hits", cfg.crude.n_hits);
    std::string target = "enlarged";
    s.string("target", target);
    if (target == "enlarged")
      cfg.crude.target = StopTarget::Enlarged;
    else if (target == "star")
      cfg.crude.target = StopTarget::Star;
    else
      throw SchemaError("crude.target: expected \"enlarged\" or \"star\"");
    s.finish();
  }
  top.get("crude");
  check(cfg.crude.n_hits > 0, "crude.n_hits must be positive");

  top.finish();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

json effective_config(const RunConfig& cfg) {
  json atoms = json::array();
  for (const auto& a : cfg.model.atoms) atoms.push_back({{"dir", a.dir}, {"weight", a.weight}});
  json j;
  j["model"] = {{"alpha", cfg.model.alpha},
                {"xm", cfg.model.xm},
                {"body_radius", cfg.model.body_radius},
                {"atoms", atoms}};
  j["target"] = {{"directions", cfg.target_input.directions},
                 {"offsets", cfg.target_input.offsets},
                 {"delta", cfg.target_input.delta},
                 {"beta", cfg.target_input.beta},
                 {"gamma", cfg.target_input.gamma}};
  j["kernel"] = {{"theta", cfg.kernel.theta},
                 {"a", cfg.kernel.a},
                 {"delta2", cfg.kernel.delta2},
                 {"max_step_factor", cfg.kernel.max_step_factor},
                 {"value_strategy", strategy_name(cfg.value_strategy)}};
  j["mollifier"] = {{"c0_tilde", cfg.mollifier.c0_tilde},
                    {"delta0", cfg.mollifier.delta0},
                    {"epsilon", cfg.mollifier.epsilon},
                    {"c1", cfg.mollifier.c1}};
  j["sim"] = {{"b", cfg.sim.b},
              {"b_list", cfg.sim.b_list},
              {"n_paths", cfg.sim.n_paths},
              {"seed", cfg.sim.seed},
              {"per_path_csv", cfg.sim.per_path_csv}};
  j["lyapunov"] = {{"states", cfg.lyapunov.states},
                   {"n_mc", cfg.lyapunov.n_mc},
                   {"theta", cfg.lyapunov.theta}};
  j["limits"] = {{"level", cfg.limits.level},
                 {"u", cfg.limits.u},
                 {"lln_eps", cfg.limits.lln_eps},
                 {"lln_max_fraction", cfg.limits.lln_max_fraction},
                 {"min_paths", cfg.limits.min_paths}};
  j["crude"] = {{"n_hits", cfg.crude.n_hits}, {"target", crude_target_name(cfg.crude.target)}};
  // nlohmann writes an empty vector<Vec> as null; keep arrays for the schema.
  if (cfg.lyapunov.states.empty()) j["lyapunov"]["states"] = json::array();
  if (cfg.sim.b_list.empty()) j["sim"]["b_list"] = json::array();
  return j;
}

std::vector<Vec> default_lyapunov_states(const RunConfig& cfg, double b) {
  const MixtureKernel kernel = cfg.kernel_at(b);
  const std::size_t d = kernel.model().dim();
  std::vector<Vec> out;
  for (double tau : {0.0, 0.5, 1.0, 2.0, 4.0}) {
    for (double xi : {0.0, 0.3, 0.6, -0.5}) {
      Vec s(d, 0.0 - tau * b);
      s[0] += xi * b;
      // Moving along -1 lowers every r-piece by b per unit (eta^T v_j = -1)
      // and raises eta^T s; stop once inside the region or past b Gamma.
      for (int it = 0; it < 64 && !in_drift_region(kernel, s); ++it) {
        if (gamma_exit(kernel.spec().gamma, b, s)) break;
        for (auto& x : s) x -= 0.5 * b;
      }
      if (in_drift_region(kernel, s)) out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace ruinsim
