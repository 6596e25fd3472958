#include "run_config.hpp"

#include "bsvie/error.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace bsvie::app {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string unquote(std::string_view v, const std::string& where) {
  if (v.empty() || v.front() != '"') return std::string(trim(v.substr(0, v.find('#'))));
  std::string out;
  std::size_t k = 1;
  for (; k < v.size(); ++k) {
    const char c = v[k];
    if (c == '"') break;
    if (c == '\\') {
      if (++k == v.size()) break;
      if (v[k] != '"' && v[k] != '\\') throw ValidationError(where + ": unknown escape \\" + v[k]);
    }
    out += v[k];
  }
  if (k >= v.size()) throw ValidationError(where + ": unterminated string");
  const std::string_view rest = trim(v.substr(k + 1));
  if (!rest.empty() && rest.front() != '#') throw ValidationError(where + ": text after closing quote");
  return out;
}

template <class T>
T to_number(const std::string& key, const std::string& s) {
  T value{};
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ValidationError("config: " + key + " = '" + s + "' is not a valid number");
  }
  return value;
}

}  // namespace

const std::map<std::string, RunConfig::Key>& RunConfig::schema() {
  static const std::map<std::string, Key> keys = {
      {"axioms.c", {"1", "translation amount"}},
      {"axioms.lambda", {"2", "homogeneity factor"}},
      {"axioms.pivot", {"-1", "past-independence node (negative: N/2)"}},
      {"axioms.second", {"wT^2 - t", "second position for sub-additivity"}},
      {"axioms.shift", {"0.5", "psi_bar = psi + shift for monotonicity"}},
      {"ensemble.M", {"65536", "number of paths"}},
      {"ensemble.seed", {"1", "RNG seed"}},
      {"grid.N", {"64", "number of steps"}},
      {"grid.S", {"", "interval start (default: case start or 0)"}},
      {"grid.T", {"", "horizon (default: case horizon or 1)"}},
      {"output.csv", {"true", "write CSV tables"}},
      {"output.dir", {"", "output directory (default: $BSVIE_OUTPUT_ROOT/<cmd>-<hash>)"}},
      {"output.full_paths", {"false", "also write per-path values"}},
      {"output.json", {"true", "write JSON summaries"}},
      {"output.svg", {"true", "write the convergence chart"}},
      {"problem.case", {"", "eq43, eq44, eq48-49, zero, corrected-intro"}},
      {"problem.generator", {"", "g(t, s, y, z, zeta, w, wt)"}},
      {"problem.terminal", {"", "Psi(t, T, T1, wt, wT)"}},
      {"residual.form", {"eq1", "eq1 (Z(t,s) dW) or eq45 (Z(s,t) dW)"}},
      {"residual.source", {"reference", "reference fields or solve output"}},
      {"risk.eta", {"0.1", "eta(s, T1, T)"}},
      {"risk.f", {"", "f(t, s, y) for the custom preset"}},
      {"risk.position", {"wT", "psi(t, T, T1, wt, wT)"}},
      {"risk.preset", {"linear", "linear, abs, custom"}},
      {"risk.r1", {"0", "drift on Z(t,s)"}},
      {"risk.r2", {"0", "drift on Z(s,t)"}},
      {"risk.route", {"direct", "direct, girsanov"}},
      {"solver.degree", {"3", "polynomial basis degree"}},
      {"solver.max_iter", {"50", "Picard iteration cap"}},
      {"solver.mode", {"s", "s, m, adapted41"}},
      {"solver.picard", {"false", "iterate the frozen-coefficient map"}},
      {"solver.ridge", {"1e-10", "ridge on non-constant coefficients"}},
      {"solver.tol", {"1e-6", "relative update tolerance"}},
      {"verify.levels", {"16,32,64", "N or N:M entries"}},
  };
  return keys;
}

RunConfig::RunConfig() {
  for (const auto& [k, v] : schema()) values_[k] = v.fallback;
}

RunConfig RunConfig::parse(std::string_view text, std::string_view origin) {
  RunConfig cfg;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view raw =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const std::string where = std::string(origin) + ":" + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ValidationError(where + ": expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ValidationError(where + ": empty key");
    if (!schema().count(key)) throw ValidationError(where + ": unknown key '" + key + "'");
    if (cfg.explicitly_set(key)) throw ValidationError(where + ": duplicate key '" + key + "'");
    cfg.set(key, unquote(trim(line.substr(eq + 1)), where));
  }
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("config: cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!schema().count(key)) throw ValidationError("config: unknown key '" + key + "'");
  values_[key] = value;
  set_.insert(key);
}

const std::string& RunConfig::text(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ValidationError("config: unknown key '" + key + "'");
  return it->second;
}

double RunConfig::number(const std::string& key) const { return to_number<double>(key, text(key)); }
long long RunConfig::integer(const std::string& key) const {
  return to_number<long long>(key, text(key));
}
std::uint64_t RunConfig::unsigned_integer(const std::string& key) const {
  return to_number<std::uint64_t>(key, text(key));
}

bool RunConfig::flag(const std::string& key) const {
  const std::string& v = text(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ValidationError("config: " + key + " = '" + v + "' is not a boolean");
}

std::string RunConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    out += k + " = \"";
    for (char c : v) {
      if (c == '"' || c == '\\') out += '\\';
      out += c;
    }
    out += "\"\n";
  }
  return out;
}

std::uint64_t RunConfig::hash() const { return fnv1a(canonical()); }

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<LevelSpec> parse_levels(std::string_view text, long long default_paths) {
  std::vector<LevelSpec> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const std::string_view item =
        trim(text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    pos = comma == std::string_view::npos ? text.size() + 1 : comma + 1;
    const auto colon = item.find(':');
    LevelSpec l;
    l.steps = to_number<long long>("verify.levels", std::string(item.substr(0, colon)));
    l.paths = colon == std::string_view::npos
                  ? default_paths
                  : to_number<long long>("verify.levels", std::string(item.substr(colon + 1)));
    out.push_back(l);
  }
  if (out.empty()) throw ValidationError("config: verify.levels is empty");
  return out;
}

}  // namespace bsvie::app
