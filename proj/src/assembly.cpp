#include "imfem/assembly.hpp"

namespace imfem {

DofMap interior_dofs(const Mesh& mesh) {
    DofMap d;
    d.node_to_dof.assign(mesh.num_nodes(), DofMap::none);
    for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
        if (mesh.is_interior(i)) {
            d.node_to_dof[i] = d.dof_to_node.size();
            d.dof_to_node.push_back(i);
        }
    }
    return d;
}

DofMap all_dofs(const Mesh& mesh) {
    DofMap d;
    d.node_to_dof.resize(mesh.num_nodes());
    d.dof_to_node.resize(mesh.num_nodes());
    for (std::size_t i = 0; i < mesh.num_nodes(); ++i)
        d.node_to_dof[i] = d.dof_to_node[i] = i;
    return d;
}

FeFunction extend_by_zero(std::shared_ptr<const Mesh> mesh, const DofMap& dofs,
                          std::span<const double> values) {
    std::vector<double> c(mesh->num_nodes(), 0.0);
    for (std::size_t k = 0; k < dofs.size(); ++k)
        c[dofs.dof_to_node[k]] = values[k];
    return {std::move(mesh), std::move(c)};
}

std::vector<double> restrict_to(const DofMap& dofs, std::span<const double> nodal) {
    std::vector<double> out(dofs.size());
    for (std::size_t k = 0; k < dofs.size(); ++k)
        out[k] = nodal[dofs.dof_to_node[k]];
    return out;
}

namespace {

template <typename ElementMatrix>
SparseMatrix assemble_constant(const Mesh& mesh, const DofMap& dofs, ElementMatrix&& local) {
    TripletBuffer t;
    t.reserve(9 * mesh.num_triangles());
    for (std::size_t k = 0; k < mesh.num_triangles(); ++k) {
        const auto& tri = mesh.triangle(k);
        const auto m = local(k);
        for (int a = 0; a < 3; ++a) {
            const std::size_t r = dofs.node_to_dof[tri[a]];
            if (r == DofMap::none)
                continue;
            for (int b = 0; b < 3; ++b) {
                const std::size_t c = dofs.node_to_dof[tri[b]];
                if (c != DofMap::none)
                    t.add(r, c, m[a][b]);
            }
        }
    }
    return {dofs.size(), t};
}

} // namespace

SparseMatrix assemble_mass(const Mesh& mesh, const DofMap& dofs) {
    const double d = mesh.triangle_area() / 6.0;
    const double o = mesh.triangle_area() / 12.0;
    return assemble_constant(mesh, dofs, [&](std::size_t) {
        return std::array<std::array<double, 3>, 3>{{{d, o, o}, {o, d, o}, {o, o, d}}};
    });
}

SparseMatrix assemble_stiffness(const Mesh& mesh, const DofMap& dofs) {
    return assemble_constant(mesh, dofs, [&](std::size_t k) {
        const auto g = mesh.basis_gradients(k);
        std::array<std::array<double, 3>, 3> m{};
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                m[a][b] = mesh.triangle_area() * dot(g[a], g[b]);
        return m;
    });
}

} // namespace imfem
