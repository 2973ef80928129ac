#ifndef SIVSTARK_SIVSTARK_HPP
#define SIVSTARK_SIVSTARK_HPP

#include "sivstark/config.hpp"
#include "sivstark/core_model.hpp"
#include "sivstark/electrostatics.hpp"
#include "sivstark/errors.hpp"
#include "sivstark/fitting.hpp"
#include "sivstark/golden_section.hpp"
#include "sivstark/io.hpp"
#include "sivstark/match_oracle.hpp"
#include "sivstark/matcher.hpp"
#include "sivstark/multigrid.hpp"
#include "sivstark/spectra.hpp"
#include "sivstark/units.hpp"

#endif  // SIVSTARK_SIVSTARK_HPP
