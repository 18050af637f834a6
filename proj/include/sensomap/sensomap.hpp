#pragma once

#include "sensomap/consensus.hpp"
#include "sensomap/geometry.hpp"
#include "sensomap/mfa.hpp"
#include "sensomap/panel.hpp"
#include "sensomap/render.hpp"
#include "sensomap/rng.hpp"
#include "sensomap/similarity.hpp"
#include "sensomap/stability.hpp"
#include "sensomap/types.hpp"
