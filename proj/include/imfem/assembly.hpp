#pragma once

#include "imfem/fem.hpp"
#include "imfem/linalg.hpp"
#include "imfem/mesh.hpp"

#include <span>
#include <vector>

namespace imfem {

/// Numbering of the interior (non-Dirichlet) nodes of a mesh.
struct DofMap {
    static constexpr std::size_t none = static_cast<std::size_t>(-1);

    std::vector<std::size_t> node_to_dof;  // none on the boundary
    std::vector<std::size_t> dof_to_node;

    std::size_t size() const { return dof_to_node.size(); }
};

DofMap interior_dofs(const Mesh& mesh);
DofMap all_dofs(const Mesh& mesh);

/// Coefficient vector on the mesh nodes from dof values, zero elsewhere.
FeFunction extend_by_zero(std::shared_ptr<const Mesh> mesh, const DofMap& dofs,
                          std::span<const double> values);
std::vector<double> restrict_to(const DofMap& dofs, std::span<const double> nodal);

/// Exact P1 mass and stiffness matrices restricted to the given dofs.
SparseMatrix assemble_mass(const Mesh& mesh, const DofMap& dofs);
SparseMatrix assemble_stiffness(const Mesh& mesh, const DofMap& dofs);

} // namespace imfem
