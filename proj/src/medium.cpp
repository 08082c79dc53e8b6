#include "cabc/medium.hpp"

#include <algorithm>
#include <cmath>

namespace cabc {

namespace {

struct KindInfo {
  MediumKind kind;
  const char* name;
};

constexpr KindInfo kKinds[] = {
    {MediumKind::Uniform, "uniform"},
    {MediumKind::Waveguide, "waveguide"},
    {MediumKind::SlowDisk, "slow_disk"},
    {MediumKind::VerticalFault, "vertical_fault"},
    {MediumKind::DiagonalFault, "diagonal_fault"},
    {MediumKind::Periodic, "periodic"},
    {MediumKind::FocusingLinear, "focusing_linear"},
    {MediumKind::DefocusingArctan, "defocusing_arctan"},
};

double sq(double v) { return v * v; }

}  // namespace

std::map<std::string, double> default_params(MediumKind kind) {
  switch (kind) {
    case MediumKind::Uniform:
      return {{"c0", 1.0}};
    case MediumKind::Waveguide:
      return {{"base", 1.0}, {"depth", 0.4}, {"center", 0.5}, {"width", 0.15}};
    case MediumKind::SlowDisk:
      return {{"base", 1.0}, {"contrast", 0.6}, {"cx", 0.5}, {"cy", 0.5}, {"radius", 0.8}};
    case MediumKind::VerticalFault:
      return {{"left", 1.0}, {"right", 0.5}, {"position", 0.5}};
    case MediumKind::DiagonalFault:
      // Fault line x1 + x2 = offset; "inner" is the side containing the box centre.
      return {{"inner", 1.0}, {"outer", 0.5}, {"offset", 0.75}};
    case MediumKind::Periodic:
      return {{"hole", 1.0}, {"background", 1.0 / std::sqrt(12.0)}, {"period", 0.25}, {"hole_size", 0.125}};
    case MediumKind::FocusingLinear:
      return {{"base", 0.5}};
    case MediumKind::DefocusingArctan:
      return {{"base", 1.0}, {"slope", 4.0}};
  }
  return {};
}

std::string medium_name(MediumKind kind) {
  for (const auto& k : kKinds)
    if (k.kind == kind) return k.name;
  return "unknown";
}

MediumKind medium_kind_from_name(const std::string& name) {
  for (const auto& k : kKinds)
    if (name == k.name) return k.kind;
  throw ConfigError("unknown medium '" + name + "'");
}

double Medium::param(const std::string& name) const {
  auto it = params.find(name);
  if (it == params.end()) throw ConfigError("medium parameter '" + name + "' missing");
  return it->second;
}

Medium make_medium(MediumKind kind, const std::map<std::string, double>& overrides) {
  Medium m{kind, default_params(kind)};
  for (const auto& [key, value] : overrides) {
    if (!m.params.count(key))
      throw ConfigError("medium '" + medium_name(kind) + "' has no parameter '" + key + "'");
    if (!std::isfinite(value)) throw ConfigError("medium parameter '" + key + "' is not finite");
    m.params[key] = value;
  }
  return m;
}

Medium make_medium(const std::string& name, const std::map<std::string, double>& overrides) {
  return make_medium(medium_kind_from_name(name), overrides);
}

double eval_speed(const Medium& m, Point x) {
  switch (m.kind) {
    case MediumKind::Uniform:
      return m.param("c0");
    case MediumKind::Waveguide:
      return m.param("base") - m.param("depth") * std::exp(-sq((x.x1 - m.param("center")) / m.param("width")));
    case MediumKind::SlowDisk: {
      const double r = std::hypot(x.x1 - m.param("cx"), x.x2 - m.param("cy"));
      return m.param("base") + m.param("contrast") * (1.0 - std::exp(-sq(r / m.param("radius"))));
    }
    case MediumKind::VerticalFault:
      return x.x1 < m.param("position") ? m.param("left") : m.param("right");
    case MediumKind::DiagonalFault:
      return x.x1 + x.x2 > m.param("offset") ? m.param("inner") : m.param("outer");
    case MediumKind::Periodic: {
      const double period = m.param("period");
      const double half = 0.5 * m.param("hole_size");
      auto inside = [&](double v) {
        const double d = v - period * (std::floor(v / period) + 0.5);
        return std::abs(d) < half;
      };
      return inside(x.x1) && inside(x.x2) ? m.param("hole") : m.param("background");
    }
    case MediumKind::FocusingLinear:
      return m.param("base") + std::abs(x.x2 - 0.5);
    case MediumKind::DefocusingArctan:
      return m.param("base") + std::atan(m.param("slope") * (x.x2 - 0.5)) / kPi;
  }
  return 1.0;
}

Point apply_map(SquareMap g, Point x) {
  switch (g) {
    case SquareMap::Id: return x;
    case SquareMap::Rot90: return {1.0 - x.x2, x.x1};
    case SquareMap::Rot180: return {1.0 - x.x1, 1.0 - x.x2};
    case SquareMap::Rot270: return {x.x2, 1.0 - x.x1};
    case SquareMap::FlipX1: return {1.0 - x.x1, x.x2};
    case SquareMap::FlipX2: return {x.x1, 1.0 - x.x2};
    case SquareMap::FlipDiag: return {x.x2, x.x1};
    case SquareMap::FlipAnti: return {1.0 - x.x2, 1.0 - x.x1};
  }
  return x;
}

bool is_reflection(SquareMap g) {
  return g == SquareMap::FlipX1 || g == SquareMap::FlipX2 || g == SquareMap::FlipDiag ||
         g == SquareMap::FlipAnti;
}

int map_side(SquareMap g, int side) {
  const Point p = apply_map(g, side_point(side, 0.5));
  if (std::abs(p.x2) < 1e-12) return 1;
  if (std::abs(p.x1 - 1.0) < 1e-12) return 2;
  if (std::abs(p.x2 - 1.0) < 1e-12) return 3;
  return 4;
}

std::vector<SquareMap> symmetry_group(const Medium& medium) {
  static constexpr SquareMap all[] = {SquareMap::Id,     SquareMap::Rot90,  SquareMap::Rot180,
                                      SquareMap::Rot270, SquareMap::FlipX1, SquareMap::FlipX2,
                                      SquareMap::FlipDiag, SquareMap::FlipAnti};
  // Irrational offset keeps samples off the decided discontinuity loci.
  constexpr int M = 61;
  constexpr double off = 0.1234567891;
  std::vector<SquareMap> group;
  for (SquareMap g : all) {
    bool ok = true;
    for (int i = 0; i < M && ok; ++i)
      for (int j = 0; j < M && ok; ++j) {
        const Point x{-0.5 + 2.0 * (i + off) / M, -0.5 + 2.0 * (j + off * off) / M};
        const double a = eval_speed(medium, x);
        const double b = eval_speed(medium, apply_map(g, x));
        ok = std::abs(a - b) <= 1e-12 * std::abs(a);
      }
    if (ok) group.push_back(g);
  }
  return group;
}

Point side_point(int side, double t) {
  switch (side) {
    case 1: return {t, 0.0};
    case 2: return {1.0, t};
    case 3: return {1.0 - t, 1.0};
    case 4: return {0.0, 1.0 - t};
  }
  throw ConfigError("side must be in 1..4");
}

EdgeSlowness::EdgeSlowness(const Medium& medium, int side, int cells, std::function<double(double)> slowness)
    : medium_(&medium), slowness_(std::move(slowness)), side_(side), cells_(std::max(2, cells + (cells % 2))) {
  if (side < 1 || side > 4) throw ConfigError("side must be in 1..4");
  const int panels = cells_ / 2;
  table_.assign(panels + 1, 0.0);
  const double dt = 1.0 / cells_;
  for (int m = 0; m < panels; ++m) {
    const double a = 2.0 * m * dt;
    table_[m + 1] = table_[m] + dt / 3.0 * (f(a) + 4.0 * f(a + dt) + f(a + 2 * dt));
  }
}

double EdgeSlowness::f(double t) const {
  const double c = eval_speed(*medium_, side_point(side_, t));
  return slowness_ ? slowness_(c) : 1.0 / c;
}

double EdgeSlowness::simpson(double a, double b) const {
  if (b <= a) return 0.0;
  return (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b));
}

double EdgeSlowness::cumulative(double t) const {
  t = std::clamp(t, 0.0, 1.0);
  const int panels = cells_ / 2;
  int m = static_cast<int>(std::floor(t * panels));
  m = std::clamp(m, 0, panels);
  const double tm = static_cast<double>(m) / panels;
  return table_[m] + simpson(tm, t);
}

double traveltime(const EdgeSlowness& edge, double x, double y, TravelKind kind) {
  if (x < 0.0 || x > 1.0 || y < 0.0 || y > 1.0) throw ConfigError("traveltime: parameters must lie in [0,1]");
  const double a = std::min(x, y);
  const double b = std::max(x, y);
  const double Fa = edge.cumulative(a);
  const double Fb = edge.cumulative(b);
  const double T = edge.total();
  const double t1 = Fb - Fa;
  const double left = Fa;
  const double right = T - Fb;
  if (kind != TravelKind::T1 && !std::isfinite(T))
    throw NumericError("traveltime: edge integral of 1/c is not finite");
  switch (kind) {
    case TravelKind::T1: return t1;
    case TravelKind::T2: return t1 + 2.0 * std::min(left, right);
    case TravelKind::T3: return t1 + 2.0 * std::max(left, right);
    case TravelKind::T4: return 2.0 * T - t1;
    case TravelKind::T5: return 2.0 * T + t1;
  }
  return t1;
}

double traveltime(const Medium& medium, int side, double x, double y, TravelKind kind, int cells) {
  return traveltime(EdgeSlowness(medium, side, cells), x, y, kind);
}

}  // namespace cabc
