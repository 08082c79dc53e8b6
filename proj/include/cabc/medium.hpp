#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cabc/types.hpp"

namespace cabc {

enum class MediumKind {
  Uniform,
  Waveguide,
  SlowDisk,
  VerticalFault,
  DiagonalFault,
  Periodic,
  FocusingLinear,
  DefocusingArctan
};

struct Point {
  double x1 = 0.0;
  double x2 = 0.0;
};

/// Velocity field c(x) on the plane. Parameters are named scalars with
/// per-kind defaults; unknown names are rejected by make_medium.
struct Medium {
  MediumKind kind = MediumKind::Uniform;
  std::map<std::string, double> params;

  double param(const std::string& name) const;
};

Medium make_medium(MediumKind kind, const std::map<std::string, double>& overrides = {});
Medium make_medium(const std::string& name, const std::map<std::string, double>& overrides = {});
std::string medium_name(MediumKind kind);
MediumKind medium_kind_from_name(const std::string& name);
std::map<std::string, double> default_params(MediumKind kind);

double eval_speed(const Medium& medium, Point x);

/// Dihedral symmetries of the unit square about its centre.
enum class SquareMap { Id, Rot90, Rot180, Rot270, FlipX1, FlipX2, FlipDiag, FlipAnti };

Point apply_map(SquareMap g, Point x);
bool is_reflection(SquareMap g);
/// Boundary side hit by side s under g (sides 1..4 counter-clockwise from bottom).
int map_side(SquareMap g, int side);

/// Elements g with c(g(x)) == c(x) on a dense sample of [-0.5,1.5]^2.
std::vector<SquareMap> symmetry_group(const Medium& medium);

/// Point of side s (1..4) at counter-clockwise arclength parameter t in [0,1].
/// Side 1 runs (0,0)->(1,0), side 2 (1,0)->(1,1), side 3 (1,1)->(0,1),
/// side 4 (0,1)->(0,0).
Point side_point(int side, double t);

enum class TravelKind { T1, T2, T3, T4, T5 };

/// Cumulative integral of 1/c along one side, composite Simpson on a fixed
/// uniform mesh so that integrals over adjacent ranges add up exactly.
class EdgeSlowness {
 public:
  /// `slowness` maps the local speed c to the integrand (default 1/c).
  EdgeSlowness(const Medium& medium, int side, int cells,
               std::function<double(double)> slowness = {});

  /// Integral of 1/c from the side's start to arclength t.
  double cumulative(double t) const;
  double total() const { return table_.back(); }
  int side() const { return side_; }

 private:
  double simpson(double a, double b) const;

  double f(double t) const;

  const Medium* medium_;
  std::function<double(double)> slowness_;
  int side_;
  int cells_;  // even
  std::vector<double> table_;
};

/// Interfacial traveltimes between x and y on one side (arclength parameters).
double traveltime(const EdgeSlowness& edge, double x, double y, TravelKind kind);
double traveltime(const Medium& medium, int side, double x, double y, TravelKind kind,
                  int cells = 4096);

}  // namespace cabc
