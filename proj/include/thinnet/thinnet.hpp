#pragma once

// Umbrella header.

#include "assembler.hpp"
#include "boundary_layer.hpp"
#include "cell_section.hpp"
#include "characteristics.hpp"
#include "convergence.hpp"
#include "cutoff.hpp"
#include "errors.hpp"
#include "expression.hpp"
#include "full_reference.hpp"
#include "graph_limit.hpp"
#include "junction_mesh.hpp"
#include "network.hpp"
#include "node_elliptic.hpp"
#include "numerics.hpp"
#include "projected_cg.hpp"
