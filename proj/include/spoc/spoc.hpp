#pragma once

// Everything except the command-line front end (cli.hpp pulls in CLI11).
#include "bounds.hpp"
#include "coeff_matrix.hpp"
#include "dual_model.hpp"
#include "error.hpp"
#include "generator.hpp"
#include "mesh.hpp"
#include "ode.hpp"
#include "problem.hpp"
#include "problem_io.hpp"
#include "qp.hpp"
#include "reduction.hpp"
#include "trajectory.hpp"
#include "transcription.hpp"
