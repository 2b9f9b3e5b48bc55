#pragma once

#include "certsdp/common.hpp"
#include "certsdp/rng.hpp"
#include "certsdp/sparse_sym_matrix.hpp"
#include "certsdp/eigen_solvers.hpp"
#include "certsdp/qmp_model.hpp"
#include "certsdp/prox_inner.hpp"
#include "certsdp/cautious_agd.hpp"
#include "certsdp/cert_driver.hpp"
#include "certsdp/dual_ascent.hpp"
#include "certsdp/instance_gen.hpp"
#include "certsdp/instance_io.hpp"
