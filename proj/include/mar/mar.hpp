#ifndef MAR_MAR_HPP
#define MAR_MAR_HPP

#include "mar/bounds.hpp"
#include "mar/dml.hpp"
#include "mar/error.hpp"
#include "mar/io.hpp"
#include "mar/linalg.hpp"
#include "mar/metrics.hpp"
#include "mar/nn.hpp"
#include "mar/optimizer.hpp"
#include "mar/rbm.hpp"
#include "mar/regularizer.hpp"
#include "mar/synth.hpp"
#include "mar/verify.hpp"

#endif  // MAR_MAR_HPP
