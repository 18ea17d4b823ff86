#pragma once

#include "imfem/geometry.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

namespace imfem {

struct BoundaryEdge {
    std::array<std::size_t, 2> nodes;
    Vec2 normal;  // outward, unit length
    double length;
};

struct PointLocation {
    std::size_t triangle;
    std::array<double, 3> barycentric;  // ordered as Mesh::triangles[triangle]
};

struct BoundaryQuadraturePoint {
    Point point;
    double weight;
    Vec2 normal;
};

/// Uniform triangulation of the unit square with n cells per side.
///
/// Nodes are numbered lexicographically (x fastest). Cell (i, j) is split
/// along its lower-left to upper-right diagonal into triangles 2c and 2c+1,
/// c = i + j*n, both counterclockwise:
///   2c   = (p00, p10, p11)  lower-right half
///   2c+1 = (p00, p11, p01)  upper-left half
class Mesh {
public:
    explicit Mesh(std::size_t n);

    std::size_t subdivisions() const { return n_; }
    double size() const { return 1.0 / static_cast<double>(n_); }
    /// Longest edge of every triangle, sqrt(2)/n; the length in stabilization parameters.
    double diameter() const { return std::sqrt(2.0) / static_cast<double>(n_); }

    std::size_t num_nodes() const { return nodes_.size(); }
    std::size_t num_triangles() const { return triangles_.size(); }

    const std::vector<Point>& nodes() const { return nodes_; }
    const Point& node(std::size_t i) const { return nodes_[i]; }
    const std::vector<std::array<std::size_t, 3>>& triangles() const { return triangles_; }
    const std::array<std::size_t, 3>& triangle(std::size_t k) const { return triangles_[k]; }
    const std::vector<BoundaryEdge>& boundary_edges() const { return boundary_edges_; }
    const std::vector<bool>& interior_node_flags() const { return interior_; }
    bool is_interior(std::size_t i) const { return interior_[i]; }

    /// All triangles have the same area 1/(2n^2).
    double triangle_area() const { return area_; }
    /// Signed area computed from the vertex coordinates.
    double signed_area(std::size_t k) const;
    Point barycenter(std::size_t k) const;
    /// Constant gradients of the three P1 hat functions on triangle k.
    std::array<Vec2, 3> basis_gradients(std::size_t k) const { return grads_[k & 1u]; }
    Point from_barycentric(std::size_t k, const std::array<double, 3>& lambda) const;
    /// Barycentric coordinates of x with respect to triangle k (x need not lie in k).
    std::array<double, 3> barycentric_in(std::size_t k, const Point& x) const;

    /// Constant-time location by cell arithmetic. Points on a cell diagonal
    /// go to the lower-indexed triangle. Throws std::out_of_range outside
    /// [0,1]^2.
    PointLocation locate(const Point& x) const;

    /// Gauss-Legendre points on every boundary edge. Supported degrees 1, 3, 5.
    std::vector<BoundaryQuadraturePoint> boundary_quadrature(int degree) const;

    bool is_nested_in(const Mesh& finer) const {
        return finer.n_ % n_ == 0;
    }

private:
    std::size_t n_;
    double area_;
    std::vector<Point> nodes_;
    std::vector<std::array<std::size_t, 3>> triangles_;
    std::vector<BoundaryEdge> boundary_edges_;
    std::vector<bool> interior_;
    std::array<std::array<Vec2, 3>, 2> grads_;
};

inline Mesh build_uniform_mesh(std::size_t n) { return Mesh(n); }

inline PointLocation locate_point(const Mesh& mesh, const Point& x) { return mesh.locate(x); }

} // namespace imfem
