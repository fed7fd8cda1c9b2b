#pragma once

#include <Eigen/Dense>

#include "xbarsim/crossbar.hpp"
#include "xbarsim/engine.hpp"
#include "xbarsim/fcm.hpp"

namespace xbarsim::circuit {

/// Per-device relative conductance distortion (g_ideal - g_nonideal)/g_ideal,
/// cached so the full circuit solve runs only once every refresh_interval
/// minibatch iterations. age counts apply_distortion calls since the last
/// refresh.
struct DistortionCache {
  Eigen::MatrixXd d;
  int refresh_interval = 1;
  int age = 0;
  // Conversion memoized at refresh time; reused verbatim while the ideal
  // tile is unchanged so refresh/apply round-trips are exact.
  Eigen::MatrixXd g_at_refresh;
  Eigen::MatrixXd g_non_at_refresh;
};

/// Recompute the distortion profile from the current ideal tile using the
/// given engine (fcm or aam) and reset age to 0. Entries where the ideal
/// conductance is zero (unused padding) get d = 0.
void refresh_distortion(DistortionCache& cache, const ConductanceTile& ideal,
                        EngineKind engine, const FcmOptions& fcm_opt = {});

/// G_nonideal[i][j] = g_ideal[i][j] * (1 - d[i][j]). Increments age; once age
/// reaches refresh_interval the cache is stale and the caller must refresh.
ConductanceTile apply_distortion(DistortionCache& cache, const ConductanceTile& ideal);

}  // namespace xbarsim::circuit
