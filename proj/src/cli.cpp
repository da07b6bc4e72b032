#include "contraction/cli.hpp"

#include "contraction/couplings.hpp"
#include "contraction/detail/parallel.hpp"
#include "contraction/flows.hpp"
#include "contraction/invariants.hpp"
#include "contraction/measures.hpp"
#include "contraction/mirror.hpp"
#include "contraction/pdelab.hpp"
#include "contraction/spaces.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

namespace contraction::cli {

namespace {

constexpr double kPi = std::numbers::pi;
namespace fs = std::filesystem;

// ---------------------------------------------------------------- reading

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  throw ParseError("parameter '" + path + "': " + what);
}

double num(const Json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "Infinity") return kInf;
    if (s == "-inf" || s == "-Infinity") return -kInf;
  }
  bad(path, "expected a number");
}

double num_or(const Json& obj, const std::string& key, double fallback) {
  return obj.contains(key) ? num(obj.at(key), key) : fallback;
}

int int_or(const Json& obj, const std::string& key, int fallback) {
  if (!obj.contains(key)) return fallback;
  const Json& j = obj.at(key);
  if (!j.is_number_integer()) bad(key, "expected an integer");
  return j.get<int>();
}

bool bool_or(const Json& obj, const std::string& key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_boolean()) bad(key, "expected true or false");
  return obj.at(key).get<bool>();
}

std::string str_or(const Json& obj, const std::string& key, const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_string()) bad(key, "expected a string");
  return obj.at(key).get<std::string>();
}

Vec vec(const Json& j, const std::string& path) {
  if (!j.is_array()) bad(path, "expected an array of numbers");
  Vec v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Index>(i)] = num(j[i], path);
  return v;
}

Mat mat(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) bad(path, "expected a nested array (rows)");
  const std::size_t cols = j[0].size();
  Mat A(static_cast<Index>(j.size()), static_cast<Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) bad(path, "rows must have equal length");
    for (std::size_t c = 0; c < cols; ++c) A(static_cast<Index>(r), static_cast<Index>(c)) = num(j[r][c], path);
  }
  return A;
}

// ---------------------------------------------------------------- writing

Json jnum(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

Json jvec(const Vec& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(jnum(v[i]));
  return a;
}

Json jrate(const RateEstimate& r) {
  return {{"value", jnum(r.value)}, {"kind", to_string(r.kind)}, {"samples", r.samples}};
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void dump_into(const Json& j, std::ostringstream& out, int depth) {
  const std::string pad(2 * (depth + 1), ' '), close(2 * depth, ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out << "{}";
        return;
      }
      out << "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        out << (first ? "" : ",\n") << pad << Json(it.key()).dump() << ": ";
        dump_into(it.value(), out, depth + 1);
        first = false;
      }
      out << '\n' << close << '}';
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out << "[]";
        return;
      }
      out << "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        out << (i ? ",\n" : "") << pad;
        dump_into(j[i], out, depth + 1);
      }
      out << '\n' << close << ']';
      return;
    }
    case Json::value_t::number_float:
      out << fmt(j.get<double>());
      return;
    default:
      out << j.dump();
  }
}

// ---------------------------------------------------------------- model catalog

double parse_p(const Json& params) { return num(params.at("p"), "p"); }

VectorField field_from(const Json& j) {
  const std::string type = str_or(j, "type", "linear");
  if (type == "linear") {
    if (!j.contains("A")) bad("field.A", "missing");
    const Mat A = mat(j.at("A"), "field.A");
    if (j.contains("b")) return VectorField::affine(A, vec(j.at("b"), "field.b"));
    return VectorField::linear(A);
  }
  if (type == "hopf") {
    // u' = u (1 - |u|^2) + omega R u with R the quarter rotation.
    const double w = num_or(j, "omega", 1.0);
    return VectorField::autonomous(
        2,
        [w](const Vec& u) {
          Vec out = u * (1.0 - u.squaredNorm());
          out[0] += w * u[1];
          out[1] -= w * u[0];
          return out;
        },
        [w](const Vec& u) {
          Mat J = (1.0 - u.squaredNorm()) * Mat::Identity(2, 2) - 2.0 * u * u.transpose();
          J(0, 1) += w;
          J(1, 0) -= w;
          return J;
        });
  }
  if (type == "linear_tanh") {
    // u' = A u + c tanh(u).
    if (!j.contains("A")) bad("field.A", "missing");
    const Mat A = mat(j.at("A"), "field.A");
    const double c = num_or(j, "c", 1.0);
    return VectorField::autonomous(
        A.rows(), [A, c](const Vec& u) { return Vec(A * u + c * u.array().tanh().matrix()); },
        [A, c](const Vec& u) {
          return Mat(A + Mat((c * (1.0 - u.array().tanh().square())).matrix().asDiagonal()));
        });
  }
  bad("field.type", "unknown field type '" + type + "'");
}

DomainSampler domain_from(const Json& params, Index dim, std::uint64_t seed, std::size_t default_count = 16) {
  if (!params.contains("domain")) {
    return DomainSampler::box(Vec::Constant(dim, -1.0), Vec::Constant(dim, 1.0), default_count, seed);
  }
  const Json& d = params.at("domain");
  if (d.contains("points")) {
    std::vector<Vec> pts;
    for (const auto& p : d.at("points")) pts.push_back(vec(p, "domain.points"));
    return DomainSampler::points(std::move(pts));
  }
  const std::string type = str_or(d, "type", "box");
  const auto count = static_cast<std::size_t>(int_or(d, "count", static_cast<int>(default_count)));
  if (type == "box") {
    const Vec lo = d.contains("lo") ? vec(d.at("lo"), "domain.lo") : Vec::Constant(dim, -1.0);
    const Vec hi = d.contains("hi") ? vec(d.at("hi"), "domain.hi") : Vec::Constant(dim, 1.0);
    return DomainSampler::box(lo, hi, count, seed);
  }
  const Vec center = d.contains("center") ? vec(d.at("center"), "domain.center") : Vec::Zero(dim);
  const double r = num_or(d, "radius", 1.0);
  if (type == "ball") return DomainSampler::ball(center, r, count, seed);
  if (type == "sphere") return DomainSampler::sphere(center, r, count, seed);
  bad("domain.type", "unknown domain type '" + type + "'");
}

Grid grid_from(const Json& j) {
  Grid g;
  g.n = int_or(j, "n", 32);
  g.dim = int_or(j, "dim", 1);
  g.bc = boundary_from_string(str_or(j, "bc", "periodic"));
  g.length = num_or(j, "length", 1.0);
  const std::string scheme = str_or(j, "scheme", "second_order");
  if (scheme == "spectral") g.scheme = LaplacianScheme::spectral;
  else if (scheme != "second_order") bad("grid.scheme", "expected second_order or spectral");
  g.validate();
  return g;
}

// {"constant": c, "sin": [[k, a], ...], "cos": [[k, a], ...], "noise": s} in x.
Vec profile_from(const Json& j, const Grid& g, std::uint64_t seed) {
  const double c = num_or(j, "constant", 0.0);
  std::vector<std::pair<double, double>> sines, cosines;
  const auto terms = [&](const char* key, auto& out) {
    if (!j.contains(key)) return;
    for (const auto& t : j.at(key)) {
      if (!t.is_array() || t.size() != 2) bad(key, "expected [frequency, amplitude] pairs");
      out.emplace_back(num(t[0], key), num(t[1], key));
    }
  };
  terms("sin", sines);
  terms("cos", cosines);
  Vec u = g.sample([&](const Vec& x) {
    double v = c;
    for (auto [k, a] : sines) v += a * std::sin(2 * kPi * k * x[0] / g.length);
    for (auto [k, a] : cosines) v += a * std::cos(2 * kPi * k * x[0] / g.length);
    return v;
  });
  const double noise = num_or(j, "noise", 0.0);
  if (noise != 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    for (Index i = 0; i < u.size(); ++i) u[i] += noise * gauss(rng);
  }
  return u;
}

Vec initial_from(const Json& params, const Grid& g, int components, std::uint64_t seed) {
  const Index N = g.size();
  Vec u0(N * components);
  if (!params.contains("initial")) {
    u0.setZero();
    return u0;
  }
  const Json& init = params.at("initial");
  for (int c = 0; c < components; ++c) {
    const Json& prof = init.is_array() ? init.at(static_cast<std::size_t>(c)) : init;
    u0.segment(c * N, N) = profile_from(prof, g, seed + static_cast<std::uint64_t>(c));
  }
  return u0;
}

Reaction reaction_from(const Json& params, int components) {
  if (!params.contains("reaction")) return {};
  const Json& r = params.at("reaction");
  const std::string type = str_or(r, "type", "none");
  if (type == "none") return {};
  if (type == "linear") {
    const Mat K = mat(r.at("K"), "reaction.K");
    if (K.rows() != components || K.cols() != components) bad("reaction.K", "must be components x components");
    return [K](double, const Vec& u) { return Vec(K * u); };
  }
  if (type == "cubic") {
    const double a = num_or(r, "a", 1.0);
    return [a](double, const Vec& u) { return Vec(a * u - u.cwiseProduct(u).cwiseProduct(u)); };
  }
  bad("reaction.type", "unknown reaction type '" + type + "'");
}

SubspaceSpec subspace_from(const Json& params) { return SubspaceSpec::from_projection(mat(params.at("P"), "P")); }

BlockFn constant_block(const Json& j, const std::string& path) {
  if (j.is_null()) return {};
  const Mat A = mat(j, path);
  return [A](double, const Vec&) { return A; };
}

BlockSystem blocks_from(const Json& params, double p) {
  BlockSystem sys;
  sys.product_p = p;
  const Json& rows = params.at("blocks");
  if (!rows.is_array() || rows.empty()) bad("blocks", "expected a square nested list of blocks");
  const std::size_t m = rows.size();
  sys.dims.assign(m, 0);
  sys.blocks.assign(m, std::vector<BlockFn>(m));
  for (std::size_t i = 0; i < m; ++i) {
    if (!rows[i].is_array() || rows[i].size() != m) bad("blocks", "expected a square nested list of blocks");
    for (std::size_t j = 0; j < m; ++j) {
      const std::string path = "blocks[" + std::to_string(i) + "][" + std::to_string(j) + "]";
      sys.blocks[i][j] = constant_block(rows[i][j], path);
      if (i == j) {
        if (rows[i][j].is_null()) bad(path, "diagonal blocks are required");
        sys.dims[i] = static_cast<Index>(rows[i][j].size());
      }
    }
  }
  sys.validate();
  return sys;
}

// ---------------------------------------------------------------- kinds

const std::map<std::string, std::vector<std::string>>& required_keys() {
  static const std::map<std::string, std::vector<std::string>> req = {
      {"measure", {"A", "p"}},
      {"verify", {"field", "lambda", "p"}},
      {"subspace", {"field", "P", "p"}},
      {"manifold", {"field", "manifold", "p"}},
      {"couple", {"mode"}},
      {"pde-rd", {"grid", "alphas"}},
      {"pde-claw", {"grid", "flux"}},
      {"poisson", {"grid", "reaction"}},
      {"regress", {"p", "samples", "features"}},
      {"symmetry", {"field", "T"}},
  };
  return req;
}

RunResult run_measure(const Scenario& sc) {
  const Json& P = sc.params;
  const Mat A = mat(P.at("A"), "A");
  const double p = parse_p(P);
  const NormSpec spec = P.contains("weight") ? NormSpec::weighted(p, mat(P.at("weight"), "weight")) : NormSpec::lp(p);
  RunResult out;
  const RateEstimate r = lognorm(A, spec, sc.seed);
  Json res = {{"lognorm", jnum(r.value)}, {"rate", jrate(r)}};
  if (spec.is_plain() && (p == 1.0 || p == 2.0 || std::isinf(p)) && A.rows() == A.cols()) {
    res["lognorm_limit"] = jnum(lognorm_limit(A, spec, sc.seed).value);
  }
  if (A.rows() == A.cols()) res["operator_norm"] = jnum(operator_norm(A, spec, sc.seed));
  out.pass = true;
  if (P.contains("claim")) {
    const double claim = num(P.at("claim"), "claim");
    res["claim"] = jnum(claim);
    out.pass = r.value <= claim;
  }
  out.report["results"] = res;
  return out;
}

RunResult run_verify(const Scenario& sc) {
  const Json& P = sc.params;
  const VectorField f = field_from(P.at("field"));
  const NormSpec spec = NormSpec::lp(parse_p(P));
  const double lambda = num(P.at("lambda"), "lambda");
  const double kappa = num_or(P, "kappa", 1.0);
  const double t1 = num_or(P, "t_end", 1.0);
  CertificateOptions opts;
  opts.h = num_or(P, "h", 1e-3);
  std::vector<std::pair<Vec, Vec>> pairs;
  if (P.contains("pairs")) {
    for (const auto& pr : P.at("pairs")) {
      if (!pr.is_array() || pr.size() != 2) bad("pairs", "expected [[x...], [y...]] entries");
      pairs.emplace_back(vec(pr[0], "pairs"), vec(pr[1], "pairs"));
    }
  } else {
    const auto pts = domain_from(P, f.dim, sc.seed, 8).draw();
    for (std::size_t i = 0; i + 1 < pts.size(); i += 2) pairs.emplace_back(pts[i], pts[i + 1]);
  }
  if (pairs.empty()) bad("pairs", "at least one pair is needed");
  const CertificateResult cr = verify_contraction(f, pairs, spec, lambda, kappa, 0.0, t1, opts);
  RunResult out;
  out.pass = cr.pass;
  out.report["results"] = {{"max_violation", jnum(cr.max_violation)}, {"fitted_lambda", jnum(cr.fitted_lambda)},
                           {"fitted_kappa", jnum(cr.fitted_kappa)},   {"claimed_lambda", jnum(lambda)},
                           {"claimed_kappa", jnum(kappa)},             {"pairs", cr.pairs},
                           {"checks", cr.checks}};
  const auto a = integrate(f, pairs.front().first, 0.0, t1, opts.h);
  const auto b = integrate(f, pairs.front().second, 0.0, t1, opts.h);
  out.series.push_back({"distance", a.times, pair_distances(a, b, spec)});
  return out;
}

RunResult run_subspace(const Scenario& sc) {
  const Json& P = sc.params;
  const VectorField f = field_from(P.at("field"));
  const SubspaceSpec sub = subspace_from(P);
  const NormSpec spec = NormSpec::lp(parse_p(P));
  const double tol = num_or(P, "tol", 1e-8);
  const auto rep = subspace_certificate(f, sub, domain_from(P, f.dim, sc.seed), spec, num_or(P, "time", 0.0), tol);
  RunResult out;
  out.pass = rep.pass;
  out.report["results"] = {{"invariance_residual", jnum(rep.invariance_residual)},
                           {"coupling_residual", jnum(rep.coupling_residual)},
                           {"rate", jrate(rep.rate)}};
  return out;
}

RunResult run_manifold(const Scenario& sc) {
  const Json& P = sc.params;
  const VectorField f = field_from(P.at("field"));
  const NormSpec spec = NormSpec::lp(parse_p(P));
  const Json& M = P.at("manifold");
  const std::string type = str_or(M, "type", "sphere");
  const double tol = num_or(P, "tol", 1e-8);
  const auto ambient = domain_from(P, f.dim, sc.seed);
  ManifoldSpec man;
  std::vector<Vec> on;
  if (type == "sphere") {
    const double r = num_or(M, "radius", 1.0);
    man.phi = [r](const Vec& u) { return Vec::Constant(1, u.squaredNorm() - r * r); };
    man.dphi = [](const Vec& u) { return Mat(2.0 * u.transpose()); };
    if (f.dim == 2) man.loop = [r](double th) { return Vec((Vec(2) << r * std::cos(th), r * std::sin(th)).finished()); };
    on = DomainSampler::sphere(Vec::Zero(f.dim), r, 32, sc.seed).draw();
  } else if (type == "linear") {
    const Mat C = mat(M.at("C"), "manifold.C");
    man = ManifoldSpec::linear(C);
    const Mat proj = Mat::Identity(C.cols(), C.cols()) - C.completeOrthogonalDecomposition().pseudoInverse() * C;
    for (const Vec& u : ambient.draw()) on.push_back(proj * u);
  } else {
    bad("manifold.type", "expected sphere or linear");
  }
  const auto rep = manifold_certificate(f, man, DomainSampler::points(on), ambient, spec, 0.0, tol);
  RunResult out;
  out.pass = rep.pass;
  Json res = {{"tangency_residual", jnum(rep.tangency_residual)},
              {"min_singular_value", jnum(rep.min_singular_value)},
              {"zero_set_points", rep.zero_set_points},
              {"rate", jrate(rep.rate)},
              {"rate_without_curvature", jrate(rep.rate_without_curvature)}};
  if (P.contains("period")) {
    if (!man.loop) bad("period", "limit-cycle checks need a 2-D sphere manifold");
    const auto lc = limit_cycle_certificate(f, man, num(P.at("period"), "period"), ambient, spec, tol);
    res["limit_cycle"] = {{"tangency_residual", jnum(lc.tangency_residual)},
                          {"periodicity_residual", jnum(lc.periodicity_residual)},
                          {"min_speed", jnum(lc.min_speed)},
                          {"rate", jrate(lc.rate)},
                          {"pass", lc.pass}};
    out.pass = out.pass && lc.pass;
  }
  out.report["results"] = res;
  return out;
}

RunResult run_couple(const Scenario& sc) {
  const Json& P = sc.params;
  const std::string mode = str_or(P, "mode", "");
  RunResult out;
  if (mode == "feedforward") {
    for (const char* key : {"A1", "A2", "C", "d1", "d2"}) {
      if (!P.contains(key)) throw ValidationError("missing parameters", {std::string("params.") + key});
    }
    const double p = P.contains("p") ? parse_p(P) : 2.0;
    const double t1 = num_or(P, "t_end", 2.0);
    const auto cc = feedforward_check(mat(P.at("A1"), "A1"), mat(P.at("A2"), "A2"), mat(P.at("C"), "C"),
                                      vec(P.at("d1"), "d1"), vec(P.at("d2"), "d2"), t1, NormSpec::lp(p),
                                      num_or(P, "h", 1e-3));
    out.pass = cc.max_excess <= 1e-6;
    out.report["results"] = {{"lambda1", jnum(cc.lambda1)},     {"lambda2", jnum(cc.lambda2)},
                             {"coupling", jnum(cc.coupling)},   {"max_excess", jnum(cc.max_excess)},
                             {"printed_value_at_end", jnum(cc.printed_value_at_end)}};
    return out;
  }
  if (!P.contains("blocks")) throw ValidationError("missing parameters", {"params.blocks"});
  const double p = P.contains("p") ? parse_p(P) : 2.0;
  const BlockSystem sys = blocks_from(P, p);
  const auto sampler = domain_from(P, sys.total_dim(), sc.seed, 4);
  if (mode == "feedback") {
    const auto rep = feedback_certificate(sys, NormSpec::lp(p), sampler);
    out.pass = rep.composite.value < 0.0;
    Json rates = Json::array();
    for (double r : rep.block_rates) rates.push_back(jnum(r));
    Json res = {{"skew_residual", jnum(rep.skew_residual)}, {"block_rates", rates},
                {"max_block_rate", jnum(rep.max_block_rate)}, {"composite", jrate(rep.composite)},
                {"zero_range_residual", jnum(rep.zero_range_residual)}};
    if (rep.equivalence_gap) res["equivalence_gap"] = jnum(*rep.equivalence_gap);
    out.report["results"] = res;
    return out;
  }
  if (mode == "product") {
    const auto rep = product_lp_rate(sys, sampler, 0.0, num_or(P, "horizon", 1.0));
    out.pass = rep.product_rate < 0.0 && rep.simulation_within_bound;
    Json rates = Json::array();
    for (double r : rep.block_rates) rates.push_back(jnum(r));
    out.report["results"] = {{"block_rates", rates},
                             {"product_rate", jnum(rep.product_rate)},
                             {"direct", jrate(rep.direct)},
                             {"simulated_rate", jnum(rep.simulated_rate)},
                             {"simulation_within_bound", rep.simulation_within_bound}};
    return out;
  }
  bad("mode", "expected feedback, product or feedforward");
}

Json condition_residuals(const PatternReport& rep) {
  Json w = Json::array();
  for (double r : rep.witness_residuals) w.push_back(jnum(r));
  return {{"invariance_residual", jnum(rep.invariance_residual)},
          {"reaction_rate", jnum(rep.reaction_rate)},
          {"laplacian_rate", jnum(rep.laplacian_rate)},
          {"min_alpha", jnum(rep.min_alpha)},
          {"rate_condition", rep.rate_condition},
          {"printed_rate_condition", rep.printed_rate_condition},
          {"predicted_rate", jnum(rep.predicted_rate)},
          {"witness_residuals", w},
          {"witness_mass", jnum(rep.witness_mass)},
          {"excitation_rate_sum", jnum(rep.excitation_rate_sum)},
          {"excitation_bound", jnum(rep.excitation_bound)},
          {"excitation_bound_printed_q", jnum(rep.excitation_bound_printed_q)},
          {"simulated_rate", jnum(rep.simulated_rate)},
          {"mode1_growth", jnum(rep.mode1_growth)},
          {"sync_distance_end", jnum(rep.sync_distance_end)},
          {"antisync_distance_end", jnum(rep.antisync_distance_end)},
          {"simulation_consistent", rep.simulation_consistent}};
}

RunResult run_rd(const Scenario& sc) {
  const Json& P = sc.params;
  const Grid g = grid_from(P.at("grid"));
  std::vector<double> alphas;
  for (const auto& a : P.at("alphas")) alphas.push_back(num(a, "alphas"));
  const int m = static_cast<int>(alphas.size());
  const RdSystem sys{g, alphas, reaction_from(P, m)};
  sys.validate();
  const std::string mode = str_or(P, "mode", "simulate");
  const double t_end = num_or(P, "t_end", 0.2);
  const double h_t = num_or(P, "h_t", 0.9 * sys.max_step());
  RunResult out;

  if (mode == "suppression" || mode == "excitation") {
    PatternOptions opts;
    opts.t_end = t_end;
    opts.h_t = h_t;
    opts.tol = num_or(P, "tol", 1e-8);
    const Vec witness = P.contains("witness") ? profile_from(P.at("witness"), g, sc.seed) : Vec();
    const auto sampler = domain_from(P, g.size() * m, sc.seed, 4);
    const auto rep = pattern_report(sys, sampler,
                                    mode == "suppression" ? PatternMode::suppression : PatternMode::excitation,
                                    witness, opts);
    out.pass = rep.pass;
    out.report["results"] = condition_residuals(rep);
    return out;
  }
  if (mode != "simulate") bad("mode", "expected simulate, suppression or excitation");

  const Vec u0 = initial_from(P, g, m, sc.seed);
  const auto res = rd_simulate(sys, u0, 0.0, t_end, h_t);
  const Index N = g.size();
  const Vec w = g.weights();
  const NormSpec spec = g.l2_norm();
  // Distance to the homogeneous states (to zero under dirichlet).
  const auto distance = [&](const Vec& u) {
    double s = 0.0;
    for (int c = 0; c < m; ++c) {
      Vec part = u.segment(c * N, N);
      if (g.bc != Boundary::dirichlet) part.array() -= w.dot(part) / w.sum();
      s += std::pow(norm(part, spec), 2);
    }
    return std::sqrt(s);
  };
  const double fit_from = num_or(P, "fit_from", 0.0);
  Series dist{"distance", {}, {}};
  std::vector<double> ft, fd;
  for (std::size_t k = 0; k < res.trajectory.size(); ++k) {
    const double t = res.trajectory.times[k], d = distance(res.trajectory.states[k]);
    dist.times.push_back(t);
    dist.values.push_back(d);
    if (t >= fit_from && d > 0.0) {
      ft.push_back(t);
      fd.push_back(d);
    }
  }
  const double fitted = ft.size() >= 3 ? overshoot_fit(ft, fd).lambda : 0.0;
  double drift = 0.0;
  for (const Vec& mass : res.mass) drift = std::max(drift, (mass - res.mass.front()).cwiseAbs().maxCoeff());
  Json res_json = {{"fitted_rate", jnum(fitted)},
                   {"fit_from", jnum(fit_from)},
                   {"poincare_rate", jrate(poincare_rate(g).rate)},
                   {"mass_initial", jvec(res.mass.front())},
                   {"mass_final", jvec(res.mass.back())},
                   {"max_mass_drift", jnum(drift)},
                   {"steps", res.trajectory.size() - 1},
                   {"step", jnum(res.trajectory.step)}};
  out.pass = true;
  if (P.contains("claim")) {
    const double claim = num(P.at("claim"), "claim");
    res_json["claim"] = jnum(claim);
    out.pass = fitted <= claim + num_or(P, "tol", 1e-3);
  }
  out.report["results"] = res_json;
  out.series.push_back(std::move(dist));
  for (int c = 0; c < m; ++c) {
    Series s{"mass_u" + std::to_string(c + 1), res.trajectory.times, {}};
    for (const Vec& mass : res.mass) s.values.push_back(mass[c]);
    out.series.push_back(std::move(s));
  }
  out.files.emplace_back("state.csv", grid_csv(g, res.trajectory.final_state(), m));
  return out;
}

RunResult run_claw(const Scenario& sc) {
  const Json& P = sc.params;
  const Grid g = grid_from(P.at("grid"));
  const Json& F = P.at("flux");
  const std::string type = str_or(F, "type", "linear");
  std::function<double(double)> flux, flux_prime;
  double speed = 1.0;
  if (type == "linear") {
    const double c = num_or(F, "c", 1.0);
    flux = [c](double u) { return c * u; };
    flux_prime = [c](double) { return c; };
    speed = std::abs(c);
  } else if (type == "burgers") {
    flux = [](double u) { return 0.5 * u * u; };
    flux_prime = [](double u) { return u; };
  } else {
    bad("flux.type", "expected linear or burgers");
  }
  const auto sampler = domain_from(P, g.size(), sc.seed, 8);
  const auto rate = conservation_rate(advection_linearization(g, flux_prime), g, sampler);
  Vec u0 = initial_from(P, g, 1, sc.seed);
  if (!P.contains("initial")) u0 = g.sample([&](const Vec& x) { return std::sin(2 * kPi * x[0] / g.length); });
  if (type == "burgers") speed = std::max(speed, u0.cwiseAbs().maxCoeff());
  const double t_end = num_or(P, "t_end", 1.0);
  const double h_t = num_or(P, "h_t", 0.5 * g.h() / std::max(speed, 1e-12));
  const auto sim = claw_simulate(g, flux, u0, t_end, h_t);
  const double tol = num_or(P, "tol", 1e-8);
  RunResult out;
  out.pass = rate.rate.value <= tol && sim.max_mass_drift <= tol;
  out.report["results"] = {{"rate", jrate(rate.rate)},
                           {"skewness", jnum(rate.skewness)},
                           {"nonlinear_flux", rate.nonlinear},
                           {"max_mass_drift", jnum(sim.max_mass_drift)},
                           {"step", jnum(sim.trajectory.step)}};
  out.series.push_back({"mass", sim.trajectory.times, sim.mass});
  out.files.emplace_back("state.csv", grid_csv(g, sim.trajectory.final_state(), 1));
  return out;
}

RunResult run_poisson(const Scenario& sc) {
  const Json& P = sc.params;
  const Grid g = grid_from(P.at("grid"));
  const Mat L = build_laplacian(g);
  const Index N = g.size();
  const Json& R = P.at("reaction");
  const std::string type = str_or(R, "type", "none");
  VectorField F;
  if (type == "none") {
    F = VectorField::linear(L);
  } else if (type == "constant") {
    F = VectorField::affine(L, Vec::Constant(N, num_or(R, "c", 1.0)));
  } else if (type == "linear") {
    F = VectorField::linear(Mat(L + num_or(R, "c", 0.0) * Mat::Identity(N, N)));
  } else if (type == "tanh") {
    const double c = num_or(R, "c", 1.0);
    F = VectorField::autonomous(
        N, [L, c](const Vec& u) { return Vec(L * u + c * u.array().tanh().matrix()); },
        [L, c](const Vec& u) {
          return Mat(L + Mat((c * (1.0 - u.array().tanh().square())).matrix().asDiagonal()));
        });
  } else {
    bad("reaction.type", "expected none, constant, linear or tanh");
  }
  const double p = P.contains("p") ? parse_p(P) : 2.0;
  FixedPointOptions opts;
  opts.tol = num_or(P, "tol", 1e-10);
  opts.max_t = num_or(P, "max_t", 100.0);
  opts.h_t = num_or(P, "h_t", 0.0);
  opts.force = bool_or(P, "force", false);
  const int starts = int_or(P, "starts", 5);
  if (starts < 1) bad("starts", "must be positive");
  std::mt19937_64 rng(sc.seed);
  std::normal_distribution<double> gauss;
  const double scale = num_or(P, "start_scale", 1.0);
  std::vector<Vec> inits;
  for (int s = 0; s < starts; ++s) {
    Vec u(N);
    for (Index i = 0; i < N; ++i) u[i] = scale * gauss(rng);
    inits.push_back(u);
  }
  std::vector<Vec> rate_pts = inits;
  rate_pts.push_back(Vec::Zero(N));
  const auto sampler = DomainSampler::points(rate_pts);

  RunResult out;
  std::vector<FixedPointReport> reps;
  try {
    for (const Vec& u0 : inits) reps.push_back(fixed_point_solve(F, u0, NormSpec::lp(p), sampler, opts));
  } catch (const CertificateRefused& e) {
    out.pass = false;
    out.report["results"] = {{"refused", e.what()}};
    return out;
  }
  double spread = 0.0, worst = 0.0;
  bool converged = true;
  for (const auto& r : reps) {
    spread = std::max(spread, (r.solution - reps.front().solution).cwiseAbs().maxCoeff());
    worst = std::max(worst, r.residual);
    converged = converged && r.converged;
  }
  const double agree = num_or(P, "agreement_tol", 1e-6);
  out.pass = converged && spread <= agree;
  Json res = {{"rate", jrate(reps.front().rate)},
              {"rate_sampled", reps.front().rate_sampled},
              {"converged", converged},
              {"max_residual", jnum(worst)},
              {"spread", jnum(spread)},
              {"fitted_rate", jnum(reps.front().fitted_rate)},
              {"time", jnum(reps.front().time)}};
  if (F.is_affine()) {
    const Vec rhs = F.offset ? Vec(-*F.offset) : Vec(Vec::Zero(N));
    const Vec direct = F.linear_part->partialPivLu().solve(rhs);
    res["direct_solve_gap"] = jnum((reps.front().solution - direct).cwiseAbs().maxCoeff());
  }
  out.report["results"] = res;
  out.series.push_back({"residual", reps.front().residual_times, reps.front().residual_history});
  out.files.emplace_back("state.csv", grid_csv(g, reps.front().solution, 1));
  return out;
}

RunResult run_regress(const Scenario& sc) {
  const Json& P = sc.params;
  RegressionProblem prob;
  prob.p = parse_p(P);
  for (const auto& s : P.at("samples")) {
    const Vec row = vec(s, "samples");
    if (row.size() < 2) bad("samples", "each sample is [x..., y]");
    prob.inputs.push_back(row.head(row.size() - 1));
    prob.targets.push_back(row[row.size() - 1]);
  }
  const Json& feat = P.at("features");
  const std::string ftype = str_or(feat, "type", "poly");
  if (ftype == "poly") {
    const int degree = int_or(feat, "degree", 2);
    if (degree < 0) bad("features.degree", "must be non-negative");
    prob.features = [degree](const Vec& x) {
      Vec k(degree + 1);
      double v = 1.0;
      for (int d = 0; d <= degree; ++d, v *= x[0]) k[d] = v;
      return k;
    };
  } else if (ftype == "identity") {
    prob.features = [](const Vec& x) { return x; };
  } else {
    bad("features.type", "expected poly or identity");
  }
  if (P.contains("loss")) {
    const Json& l = P.at("loss");
    if (l.is_string() && l.get<std::string>() == "squared") prob.loss = Loss::squared();
    else if (l.is_object() && l.contains("pseudo_huber")) prob.loss = Loss::pseudo_huber(num(l.at("pseudo_huber"), "loss.pseudo_huber"));
    else bad("loss", "expected \"squared\" or {\"pseudo_huber\": delta}");
  }
  MirrorOptions opts;
  opts.alpha = num_or(P, "alpha", 1.0);
  opts.h = num_or(P, "h", 0.1);
  opts.steps = static_cast<std::size_t>(int_or(P, "steps", 1000));
  opts.seed = sc.seed;
  const Vec u0 = P.contains("u0") ? vec(P.at("u0"), "u0") : Vec(Vec::Zero(prob.dim()));
  const auto rep = mirror_descent_run(prob, u0, opts);
  const double risk_tol = num_or(P, "risk_tol", 1e-8);
  RunResult out;
  out.pass = rep.risk.back() <= risk_tol && !rep.step_warning;
  out.report["results"] = {{"risk", jnum(rep.risk.back())},       {"u", jvec(rep.u)},
                           {"fitted_rate", jnum(rep.fitted_rate)}, {"path_rate", jrate(rep.path_rate)},
                           {"step_threshold", jnum(rep.step_threshold)},
                           {"step_warning", rep.step_warning},     {"gradient_norm", jnum(rep.gradient_norm)}};
  Series s{"risk", {}, rep.risk};
  for (std::size_t k = 0; k < rep.risk.size(); ++k) s.times.push_back(static_cast<double>(k) * opts.h);
  out.series.push_back(std::move(s));
  return out;
}

RunResult run_symmetry(const Scenario& sc) {
  const Json& P = sc.params;
  const VectorField f = field_from(P.at("field"));
  const Mat T = mat(P.at("T"), "T");
  const auto sampler = domain_from(P, f.dim, sc.seed);
  const double tol = num_or(P, "tol", 1e-8);
  RunResult out;
  Json res;
  if (P.contains("delta_t")) {
    const double r = spatiotemporal_residual(f, T, num(P.at("delta_t"), "delta_t"), int_or(P, "order", 1), sampler);
    res["spatiotemporal_residual"] = jnum(r);
    out.pass = r <= tol;
  } else {
    const double r = equivariance_residual(f, SymmetrySpec::linear(T), sampler);
    res["equivariance_residual"] = jnum(r);
    out.pass = r <= tol;
  }
  out.report["results"] = res;
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace

const std::vector<std::string>& known_kinds() {
  static const std::vector<std::string> kinds = [] {
    std::vector<std::string> k;
    for (const auto& [name, keys] : required_keys()) k.push_back(name);
    return k;
  }();
  return kinds;
}

Scenario parse_scenario(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("malformed scenario: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("scenario must be a JSON object");
  Scenario sc;
  if (!j.contains("kind") || !j.at("kind").is_string()) throw ParseError("scenario needs a string 'kind'");
  sc.kind = j.at("kind").get<std::string>();
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw ParseError("'seed' must be a non-negative integer");
    sc.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("output_dir")) {
    if (!j.at("output_dir").is_string()) throw ParseError("'output_dir' must be a string");
    sc.output_dir = j.at("output_dir").get<std::string>();
  }
  if (j.contains("params")) {
    if (!j.at("params").is_object()) throw ParseError("'params' must be an object");
    sc.params = j.at("params");
  }
  return sc;
}

Scenario load_scenario(const std::string& path) { return parse_scenario(read_file(path)); }

std::vector<std::string> missing_parameters(const Scenario& sc) {
  const auto& req = required_keys();
  const auto it = req.find(sc.kind);
  if (it == req.end()) throw UnknownKind("unknown scenario kind '" + sc.kind + "'");
  std::vector<std::string> missing;
  for (const auto& key : it->second) {
    if (!sc.params.contains(key)) missing.push_back("params." + key);
  }
  return missing;
}

RunResult run(const Scenario& sc) {
  const auto missing = missing_parameters(sc);
  if (!missing.empty()) {
    std::string msg = "missing parameters:";
    for (const auto& m : missing) msg += " " + m;
    throw ValidationError(msg, missing);
  }
  static const std::map<std::string, RunResult (*)(const Scenario&)> dispatch = {
      {"measure", run_measure}, {"verify", run_verify},     {"subspace", run_subspace},
      {"manifold", run_manifold}, {"couple", run_couple},   {"pde-rd", run_rd},
      {"pde-claw", run_claw},   {"poisson", run_poisson},   {"regress", run_regress},
      {"symmetry", run_symmetry}};
  RunResult out;
  try {
    out = dispatch.at(sc.kind)(sc);
  } catch (const Json::exception& e) {
    throw ParseError(std::string("bad parameter structure: ") + e.what());
  }
  out.report["kind"] = sc.kind;
  out.report["seed"] = sc.seed;
  out.report["scenario"] = sc.params;
  out.report["pass"] = out.pass;
  return out;
}

std::string dump(const Json& j) {
  std::ostringstream out;
  dump_into(j, out, 0);
  out << '\n';
  return out.str();
}

std::string emit_series(const std::string& name, const std::vector<double>& times,
                        const std::vector<double>& values, const std::string& dir) {
  if (times.size() != values.size()) throw DimensionError("series '" + name + "' has unequal lengths");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create '" + dir + "': " + ec.message());
  std::string text = "t," + name + "\n";
  for (std::size_t i = 0; i < times.size(); ++i) text += fmt(times[i]) + "," + fmt(values[i]) + "\n";
  const fs::path path = fs::path(dir) / (name + ".csv");
  write_file(path, text);
  return path.string();
}

int run_scenario(const std::string& path, const std::optional<std::string>& out_dir,
                 const std::optional<std::uint64_t>& seed, std::ostream& log) {
  const auto start = std::chrono::steady_clock::now();
  try {
    Scenario sc = load_scenario(path);
    if (seed) sc.seed = *seed;
    const std::string dir = out_dir ? *out_dir : (sc.output_dir.empty() ? std::string("out") : sc.output_dir);
    const RunResult res = run(sc);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create '" + dir + "': " + ec.message());
    write_file(fs::path(dir) / "report.json", dump(res.report));
    for (const auto& s : res.series) emit_series(s.name, s.times, s.values, dir);
    for (const auto& [name, text] : res.files) write_file(fs::path(dir) / name, text);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const Json timing = {{"wall_seconds", wall}, {"threads", detail::thread_count()}};
    write_file(fs::path(dir) / "timing.json", dump(timing));
    log << sc.kind << ": " << (res.pass ? "pass" : "certificate failed") << " (" << dir << "/report.json)\n";
    return res.pass ? kExitPass : kExitCertificateFail;
  } catch (const UnknownKind& e) {
    log << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CertificateRefused& e) {
    log << "certificate refused: " << e.what() << "\n";
    return kExitCertificateFail;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitError;
  }
}

int validate_scenario(const std::string& path, std::ostream& log) {
  try {
    const Scenario sc = load_scenario(path);
    const auto missing = missing_parameters(sc);
    if (!missing.empty()) {
      log << "invalid scenario, missing:";
      for (const auto& m : missing) log << " " << m;
      log << "\n";
      return kExitError;
    }
    log << sc.kind << ": ok\n";
    return kExitPass;
  } catch (const UnknownKind& e) {
    log << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitError;
  }
}

}  // namespace contraction::cli
