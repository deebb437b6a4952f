#pragma once

#include "helimin/core.hpp"
#include "helimin/mesh.hpp"
#include "helimin/fields.hpp"
#include "helimin/assembly.hpp"
#include "helimin/krylov.hpp"
#include "helimin/tangent_solver.hpp"
#include "helimin/minimizer.hpp"
#include "helimin/vtk.hpp"
#include "helimin/experiments.hpp"
