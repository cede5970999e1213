#pragma once

#include <robustcg/types.hpp>
#include <robustcg/robust_mean.hpp>
#include <robustcg/haar.hpp>
#include <robustcg/atoms.hpp>
#include <robustcg/rlmo.hpp>
#include <robustcg/schedule.hpp>
#include <robustcg/models.hpp>
#include <robustcg/diagnostics.hpp>
#include <robustcg/solvers.hpp>
#include <robustcg/io.hpp>
