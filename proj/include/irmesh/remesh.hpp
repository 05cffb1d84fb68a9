#pragma once

#include "irmesh/geometry.hpp"

namespace irmesh {

// Incremental isotropic remeshing: long edges split, short edges collapsed,
// valences equalized by flips, vertices relaxed tangentially and projected
// back onto the input surface. The target edge length is derived from the
// requested vertex count and adjusted between iterations until the count
// settles within 10%. Boundary edges and vertices are preserved.
//
// Throws std::invalid_argument when the input is empty or not edge-manifold;
// the message lists the offending edges.
TriangleMesh isotropic_remesh(const TriangleMesh& mesh, int target_vertex_count,
                              int iterations = 10);

}  // namespace irmesh
