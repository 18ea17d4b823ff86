#pragma once

#include "imfem/geometry.hpp"
#include "imfem/mesh.hpp"

#include <array>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace imfem {

using ScalarFunction = std::function<double(const Point&)>;
using RegionPredicate = std::function<bool(const Point&)>;

/// Quadrature on the reference triangle (0,0), (1,0), (0,1); weights sum to 1/2.
struct TriangleQuadrature {
    int degree = 0;
    std::vector<std::array<double, 3>> points;  // barycentric coordinates
    std::vector<double> weights;

    std::size_t size() const { return weights.size(); }
};

/// Supported degrees: 1 (centroid), 2 (edge midpoints), 5 (7-point Radon rule).
TriangleQuadrature triangle_rule(int degree);

/// Degree-2 rule whose three points lie strictly inside the triangle. Used
/// where integrands jump across edges of another mesh.
TriangleQuadrature interior_triangle_rule();

/// The base rule applied on each of the m² triangles of the regular
/// subdivision of the reference triangle. On a mesh refined m times inside
/// each element the sub-triangles are exactly the fine elements.
TriangleQuadrature composite_rule(const TriangleQuadrature& base, std::size_t m);

/// P1 function: one coefficient per mesh node.
class FeFunction {
public:
    FeFunction(std::shared_ptr<const Mesh> mesh, std::vector<double> coeffs);

    static FeFunction constant(std::shared_ptr<const Mesh> mesh, double value);

    const Mesh& mesh() const { return *mesh_; }
    const std::shared_ptr<const Mesh>& mesh_ptr() const { return mesh_; }
    std::span<const double> coeffs() const { return coeffs_; }
    double operator[](std::size_t i) const { return coeffs_[i]; }

    Vec2 gradient(std::size_t triangle) const;
    double value_in(std::size_t triangle, const std::array<double, 3>& lambda) const;
    double triangle_integral(std::size_t triangle) const;

private:
    std::shared_ptr<const Mesh> mesh_;
    std::vector<double> coeffs_;
};

struct ValueAndGradient {
    double value;
    Vec2 gradient;
};

/// Throws std::domain_error when f is not finite at a node.
FeFunction interpolate_nodal(std::shared_ptr<const Mesh> mesh, const ScalarFunction& f);

double mean_value(const FeFunction& u);

/// Evaluation at an arbitrary point of the unit square, possibly belonging to
/// a different mesh than the one u lives on.
ValueAndGradient evaluate_cross_mesh(const FeFunction& u, const Point& x);

/// L1 norm of 1 - s_new/s_old, with the ratio formed at the nodes and the
/// absolute value of the resulting P1 function integrated by the degree-2
/// rule. Throws std::domain_error if some nodal value of s_old is zero.
double l1_ratio_deviation(const FeFunction& s_new, const FeFunction& s_old);

/// sqrt(sum over triangles with barycenter in region of |K| |grad u|^2).
double h1_seminorm_region(const FeFunction& u, const RegionPredicate& region);
double h1_seminorm(const FeFunction& u);
double l2_norm(const FeFunction& u);

/// Integral of u over every triangle of target. Exact when target is
/// nested in u's mesh, composite quadrature otherwise.
std::vector<double> element_integrals_on(const FeFunction& u, const Mesh& target);
/// Same with the given rule on each target triangle, u evaluated across meshes.
std::vector<double> element_integrals_on(const FeFunction& u, const Mesh& target,
                                         const TriangleQuadrature& rule);

/// Text persistence: "p1-field n=<n>" then (n+1)^2 values, one per line.
void write_field(std::ostream& out, const FeFunction& u);
FeFunction read_field(std::istream& in);
void save_field(const std::string& path, const FeFunction& u);
FeFunction load_field(const std::string& path);

} // namespace imfem
