#pragma once

#include "pdgmpc/matrix.hpp"
#include "pdgmpc/numkit.hpp"
#include "pdgmpc/model.hpp"
#include "pdgmpc/ocp.hpp"
#include "pdgmpc/pdg.hpp"
#include "pdgmpc/certify.hpp"
#include "pdgmpc/baselines.hpp"
#include "pdgmpc/harness.hpp"
#include "pdgmpc/config.hpp"
