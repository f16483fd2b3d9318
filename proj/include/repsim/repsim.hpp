#ifndef REPSIM_REPSIM_HPP
#define REPSIM_REPSIM_HPP

#include "repsim/activation_store.hpp"
#include "repsim/error.hpp"
#include "repsim/linalg.hpp"
#include "repsim/prediction.hpp"
#include "repsim/report.hpp"
#include "repsim/sampling.hpp"
#include "repsim/similarity.hpp"

#endif // REPSIM_REPSIM_HPP
