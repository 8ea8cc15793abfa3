#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace liehom::cli {

namespace {

struct KeySet {
  std::vector<std::string> required;
  std::vector<std::string> optional;
};

const std::vector<std::string> kCommon{"experiment", "group", "generators", "A0", "seed", "outputs"};

KeySet keys_for(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::decompose:
      return {{}, {"Y0", "mc_samples", "peter_weyl"}};
    case ExperimentKind::coeffs:
      return {{"Y0"}, {"mc_samples"}};
    case ExperimentKind::simulate:
      return {{"Y0", "epsilon", "T", "n_traj"},
              {"dt_rule", "scheme", "store", "record_fractions", "fast_start", "effective_dt", "mc_samples"}};
    case ExperimentKind::verify_limit:
      return {{"Y0", "epsilon", "T", "n_traj"},
              {"dt_rule", "n_effective", "effective_dt", "fast_start", "record_fractions", "mc_samples"}};
    case ExperimentKind::split_test:
      return {{"Y0", "epsilon", "T", "dt_list", "n_traj"}, {"min_ratio"}};
    case ExperimentKind::rate:
      return {{"Y0", "epsilon_list", "T", "n_traj"},
              {"dt_rule", "effective_dt", "fast_start", "test_function", "mc_samples"}};
  }
  return {};
}

/// Accepts both signed and unsigned JSON integers as long as they are non-negative.
bool is_count(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

/// Collects problems instead of stopping at the first one.
class Checker {
 public:
  explicit Checker(const json& doc) : doc_(doc) {}

  void problem(const std::string& msg) { problems_.push_back(msg); }
  bool has(const char* key) const { return doc_.contains(key); }

  std::optional<double> number(const char* key, bool positive = true) {
    if (!has(key)) return std::nullopt;
    const json& v = doc_.at(key);
    if (!v.is_number()) {
      problem(std::string(key) + ": expected a number");
      return std::nullopt;
    }
    const double x = v.get<double>();
    if (!std::isfinite(x) || (positive && !(x > 0.0))) {
      problem(std::string(key) + ": expected a positive finite number");
      return std::nullopt;
    }
    return x;
  }

  std::optional<std::uint64_t> count(const char* key, bool allow_zero = false) {
    if (!has(key)) return std::nullopt;
    const json& v = doc_.at(key);
    if (!is_count(v) || (!allow_zero && v.get<std::uint64_t>() == 0)) {
      problem(std::string(key) + (allow_zero ? ": expected a non-negative integer" : ": expected a positive integer"));
      return std::nullopt;
    }
    return v.get<std::uint64_t>();
  }

  std::optional<std::vector<double>> numbers(const char* key, bool positive) {
    if (!has(key)) return std::nullopt;
    const json& v = doc_.at(key);
    if (!v.is_array() || v.empty()) {
      problem(std::string(key) + ": expected a non-empty array of numbers");
      return std::nullopt;
    }
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number() || !std::isfinite(e.get<double>()) || (positive && !(e.get<double>() > 0.0))) {
        problem(std::string(key) + (positive ? ": entries must be positive numbers" : ": entries must be numbers"));
        return std::nullopt;
      }
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::optional<std::string> string(const char* key, std::initializer_list<const char*> allowed) {
    if (!has(key)) return std::nullopt;
    const json& v = doc_.at(key);
    if (v.is_string()) {
      const auto s = v.get<std::string>();
      for (const char* a : allowed)
        if (s == a) return s;
    }
    std::string list;
    for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
    problem(std::string(key) + ": expected one of " + list);
    return std::nullopt;
  }

  const std::vector<std::string>& problems() const { return problems_; }

 private:
  const json& doc_;
  std::vector<std::string> problems_;
};

bool decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

std::string scheme_name(Scheme s) {
  switch (s) {
    case Scheme::group_sde: return "group-sde";
    case Scheme::slow_ode: return "slow-ode";
    case Scheme::split: return "split";
    case Scheme::effective: return "effective";
  }
  return "";
}

std::string store_name(StoreMode s) {
  switch (s) {
    case StoreMode::projected: return "projected";
    case StoreMode::group: return "group";
    case StoreMode::summary: return "summary";
  }
  return "";
}

}  // namespace

std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::decompose: return "decompose";
    case ExperimentKind::coeffs: return "coeffs";
    case ExperimentKind::simulate: return "simulate";
    case ExperimentKind::verify_limit: return "verify-limit";
    case ExperimentKind::split_test: return "split-test";
    case ExperimentKind::rate: return "rate";
  }
  return "";
}

std::optional<ExperimentKind> parse_kind(std::string_view s) {
  for (auto k : {ExperimentKind::decompose, ExperimentKind::coeffs, ExperimentKind::simulate,
                 ExperimentKind::verify_limit, ExperimentKind::split_test, ExperimentKind::rate})
    if (to_string(k) == s) return k;
  if (s == "verify") return ExperimentKind::verify_limit;
  return std::nullopt;
}

ExperimentConfig parse_config(const json& doc, std::optional<ExperimentKind> forced) {
  if (!doc.is_object()) throw Error(ErrorCode::config_invalid, "configuration must be a JSON object");
  Checker ck(doc);
  ExperimentConfig c;

  std::optional<ExperimentKind> kind = forced;
  if (doc.contains("experiment")) {
    const json& e = doc.at("experiment");
    const auto parsed = e.is_string() ? parse_kind(e.get<std::string>()) : std::nullopt;
    if (!parsed)
      ck.problem("experiment: expected one of decompose, coeffs, simulate, verify-limit, split-test, rate");
    else if (forced && *parsed != *forced)
      ck.problem("experiment: '" + e.get<std::string>() + "' conflicts with the subcommand '" +
                 std::string(to_string(*forced)) + "'");
    else
      kind = parsed;
  }

  std::vector<std::string> missing;
  if (!kind && !doc.contains("experiment")) missing.push_back("experiment");
  if (!doc.contains("group")) missing.push_back("group");
  if (kind) {
    c.kind = *kind;
    for (const auto& k : keys_for(*kind).required)
      if (!doc.contains(k)) missing.push_back(k);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    ck.problem("missing required keys: " + list);
  }

  if (kind) {
    std::set<std::string> allowed(kCommon.begin(), kCommon.end());
    const KeySet ks = keys_for(*kind);
    allowed.insert(ks.required.begin(), ks.required.end());
    allowed.insert(ks.optional.begin(), ks.optional.end());
    for (const auto& [key, value] : doc.items())
      if (!allowed.count(key)) ck.problem("unknown key '" + key + "' for experiment " + std::string(to_string(*kind)));
  }

  // group
  if (doc.contains("group")) {
    const json& g = doc.at("group");
    if (g.is_string()) {
      c.group = g.get<std::string>();
    } else if (g.is_object() && g.contains("name") && g.at("name").is_string()) {
      c.group = g.at("name").get<std::string>();
      for (const auto& [key, value] : g.items())
        if (key != "name" && key != "params") ck.problem("group: unknown key '" + key + "'");
      if (g.contains("params")) {
        if (!g.at("params").is_array()) ck.problem("group.params: expected an array of integers");
        else
          for (const auto& p : g.at("params")) {
            if (!p.is_number_integer()) {
              ck.problem("group.params: expected an array of integers");
              break;
            }
            c.params.push_back(p.get<int>());
          }
      }
    } else {
      ck.problem("group: expected a catalog name or {\"name\": ..., \"params\": [...]}");
    }
  }

  if (doc.contains("generators")) {
    const json& g = doc.at("generators");
    if (g.is_string() && g.get<std::string>() == "full") {
    } else if (g.is_array() && !g.empty() &&
               std::all_of(g.begin(), g.end(), [](const json& x) { return is_count(x); })) {
      c.generators = g.get<std::vector<int>>();
    } else {
      ck.problem("generators: expected \"full\" or a non-empty array of h-basis indices");
    }
  }

  auto coords = [&](const char* key, bool allow_zero_word) -> std::optional<Vector> {
    if (!doc.contains(key)) return std::nullopt;
    const json& v = doc.at(key);
    if (allow_zero_word && v.is_string() && v.get<std::string>() == "zero") return Vector();
    if (!v.is_array() || v.empty() || !std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_number(); })) {
      ck.problem(std::string(key) + (allow_zero_word ? ": expected \"zero\" or an array of coordinates"
                                                     : ": expected an array of coordinates"));
      return std::nullopt;
    }
    const auto xs = v.get<std::vector<double>>();
    return Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
  };
  if (auto a0 = coords("A0", true)) c.a0 = *a0;
  c.y0 = coords("Y0", false);

  if (doc.contains("seed")) {
    if (!is_count(doc.at("seed"))) ck.problem("seed: expected a non-negative 64-bit integer");
    else c.seed = doc.at("seed").get<std::uint64_t>();
  }

  if (doc.contains("outputs")) {
    const json& o = doc.at("outputs");
    if (!o.is_object()) {
      ck.problem("outputs: expected an object {dir, formats}");
    } else {
      for (const auto& [key, value] : o.items())
        if (key != "dir" && key != "formats") ck.problem("outputs: unknown key '" + key + "'");
      if (o.contains("dir")) {
        if (!o.at("dir").is_string() || o.at("dir").get<std::string>().empty())
          ck.problem("outputs.dir: expected a non-empty string");
        else c.out_dir = o.at("dir").get<std::string>();
      }
      if (o.contains("formats")) {
        const json& f = o.at("formats");
        bool ok = f.is_array();
        std::vector<std::string> formats;
        if (ok)
          for (const auto& x : f) {
            if (!x.is_string() || (x.get<std::string>() != "json" && x.get<std::string>() != "csv")) ok = false;
            else formats.push_back(x.get<std::string>());
          }
        if (!ok) ck.problem("outputs.formats: expected an array drawn from \"json\", \"csv\"");
        else c.formats = formats;
      }
    }
  }

  if (auto e = ck.number("epsilon")) c.epsilon = *e;
  if (auto l = ck.numbers("epsilon_list", true)) {
    if (!decreasing(*l)) ck.problem("epsilon_list: must be strictly decreasing");
    c.epsilon_list = *l;
  }
  if (auto t = ck.number("T")) c.T = *t;
  if (doc.contains("dt_rule")) {
    const json& r = doc.at("dt_rule");
    if (!r.is_object() || !r.contains("h") || !r.at("h").is_number() || !(r.at("h").get<double>() > 0.0) ||
        r.size() != 1)
      ck.problem("dt_rule: expected {\"h\": positive number}");
    else c.dt_rule.h = r.at("h").get<double>();
  }
  if (auto n = ck.count("n_traj")) c.n_traj = *n;
  if (auto n = ck.count("n_effective", true)) c.n_effective = *n;
  if (auto n = ck.count("mc_samples")) c.mc_samples = *n;
  if (auto d = ck.number("effective_dt")) c.effective_dt = *d;
  if (auto r = ck.number("min_ratio")) c.min_ratio = *r;
  if (auto l = ck.numbers("dt_list", true)) {
    if (l->size() < 2 || !decreasing(*l)) ck.problem("dt_list: needs at least two strictly decreasing entries");
    c.dt_list = *l;
  }
  if (auto l = ck.numbers("record_fractions", true)) {
    if (std::any_of(l->begin(), l->end(), [](double f) { return f > 1.0; }))
      ck.problem("record_fractions: entries must lie in (0, 1]");
    c.record_fractions = *l;
  }
  if (auto s = ck.string("scheme", {"group-sde", "slow-ode", "split", "effective"})) {
    c.scheme = *s == "group-sde" ? Scheme::group_sde
               : *s == "slow-ode" ? Scheme::slow_ode
               : *s == "split"    ? Scheme::split
                                  : Scheme::effective;
  }
  if (auto s = ck.string("store", {"projected", "group", "summary"}))
    c.store = *s == "projected" ? StoreMode::projected : *s == "group" ? StoreMode::group : StoreMode::summary;
  c.fast_start = c.kind == ExperimentKind::verify_limit ? FastStart::haar : FastStart::identity;
  if (auto s = ck.string("fast_start", {"identity", "haar"}))
    c.fast_start = *s == "haar" ? FastStart::haar : FastStart::identity;
  if (doc.contains("test_function")) {
    const json& f = doc.at("test_function");
    if (!f.is_string()) ck.problem("test_function: expected \"const\", \"xI\" or \"xI*xJ\"");
    else c.test_function = f.get<std::string>();
  }
  if (doc.contains("peter_weyl")) {
    if (!doc.at("peter_weyl").is_boolean()) ck.problem("peter_weyl: expected a boolean");
    else c.peter_weyl = doc.at("peter_weyl").get<bool>();
  }

  // Catalog and dimension checks need a well-formed group entry.
  if (ck.problems().empty()) {
    try {
      const GroupSpec spec = config_group(c);
      if (c.generators)
        for (int i : *c.generators)
          if (i >= spec.h_dim())
            ck.problem("generators: index " + std::to_string(i) + " is not below dim h = " +
                       std::to_string(spec.h_dim()));
      if (c.a0.size() != 0 && c.a0.size() != spec.h_dim())
        ck.problem("A0: expected " + std::to_string(spec.h_dim()) + " h-coordinates");
      if (c.y0 && c.y0->size() != spec.m_dim())
        ck.problem("Y0: expected " + std::to_string(spec.m_dim()) + " m-coordinates");
    } catch (const Error& e) {
      ck.problem(std::string("group: ") + e.what());
    }
  }

  if (!ck.problems().empty()) {
    std::string msg = "invalid configuration";
    for (const auto& p : ck.problems()) msg += "\n  - " + p;
    throw Error(ErrorCode::config_invalid, msg);
  }

  // Echo of the resolved configuration.
  json r;
  r["experiment"] = std::string(to_string(c.kind));
  r["group"] = {{"name", c.group}, {"params", c.params}};
  r["generators"] = c.generators ? json(*c.generators) : json("full");
  r["A0"] = c.a0.size() == 0 ? json("zero") : json(std::vector<double>(c.a0.data(), c.a0.data() + c.a0.size()));
  if (c.y0) r["Y0"] = std::vector<double>(c.y0->data(), c.y0->data() + c.y0->size());
  r["seed"] = c.seed;
  const KeySet ks = keys_for(c.kind);
  auto uses = [&](const std::string& k) {
    return std::find(ks.required.begin(), ks.required.end(), k) != ks.required.end() ||
           std::find(ks.optional.begin(), ks.optional.end(), k) != ks.optional.end();
  };
  if (uses("epsilon")) r["epsilon"] = *c.epsilon;
  if (uses("epsilon_list")) r["epsilon_list"] = c.epsilon_list;
  if (uses("T")) r["T"] = c.T;
  if (uses("dt_rule")) r["dt_rule"] = {{"h", c.dt_rule.h}};
  if (uses("n_traj")) r["n_traj"] = c.n_traj;
  if (uses("n_effective")) r["n_effective"] = c.n_effective;
  if (uses("mc_samples")) r["mc_samples"] = c.mc_samples;
  if (uses("effective_dt")) r["effective_dt"] = c.effective_dt;
  if (uses("fast_start")) r["fast_start"] = c.fast_start == FastStart::haar ? "haar" : "identity";
  if (uses("record_fractions")) r["record_fractions"] = c.record_fractions;
  if (uses("scheme")) r["scheme"] = scheme_name(c.scheme);
  if (uses("store")) r["store"] = store_name(c.store);
  if (uses("dt_list")) r["dt_list"] = c.dt_list;
  if (uses("min_ratio")) r["min_ratio"] = c.min_ratio;
  if (uses("test_function")) r["test_function"] = c.test_function;
  if (uses("peter_weyl")) r["peter_weyl"] = c.peter_weyl;
  r["outputs"] = {{"dir", c.out_dir}, {"formats", c.formats}};
  c.resolved = std::move(r);
  return c;
}

GroupSpec config_group(const ExperimentConfig& c) { return make_group(c.group, c.params); }

MultiscaleSystem config_system(const ExperimentConfig& c, const GroupSpec& spec, double epsilon) {
  std::vector<AlgebraVector> gens;
  if (c.generators) gens = h_generators(spec, *c.generators);
  else gens = h_basis_vectors(spec);
  const AlgebraVector a0 = c.a0.size() == 0 ? AlgebraVector::zero(spec) : AlgebraVector::from_h(spec, c.a0);
  return MultiscaleSystem(spec, epsilon, a0, std::move(gens), AlgebraVector::from_m(spec, *c.y0),
                          GroupElement::identity(spec));
}

}  // namespace liehom::cli
