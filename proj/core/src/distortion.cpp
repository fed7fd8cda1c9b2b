#include "xbarsim/distortion.hpp"

#include <string>

#include "xbarsim/aam.hpp"
#include "xbarsim/errors.hpp"

namespace xbarsim::circuit {

void refresh_distortion(DistortionCache& cache, const ConductanceTile& ideal,
                        EngineKind engine, const FcmOptions& fcm_opt) {
  if (cache.refresh_interval < 1)
    throw std::invalid_argument("refresh_distortion: refresh_interval must be >= 1");
  if (engine != EngineKind::fcm && engine != EngineKind::aam)
    throw std::invalid_argument("refresh_distortion: engine must be fcm or aam");

  ConductanceTile nonideal = engine == EngineKind::fcm ? fcm_convert(ideal, fcm_opt)
                                                       : aam_convert(ideal);

  cache.d.resize(ideal.rows(), ideal.cols());
  for (int j = 0; j < ideal.cols(); ++j)
    for (int i = 0; i < ideal.rows(); ++i) {
      const double gi = ideal.g(i, j);
      cache.d(i, j) = (gi == 0.0) ? 0.0 : (gi - nonideal.g(i, j)) / gi;
    }
  cache.g_at_refresh = ideal.g;
  cache.g_non_at_refresh = std::move(nonideal.g);
  cache.age = 0;
}

ConductanceTile apply_distortion(DistortionCache& cache, const ConductanceTile& ideal) {
  if (cache.d.size() == 0)
    throw StateError("apply_distortion: cache never refreshed");
  if (cache.d.rows() != ideal.rows() || cache.d.cols() != ideal.cols())
    throw std::invalid_argument("apply_distortion: cache dims do not match tile");
  if (cache.age >= cache.refresh_interval)
    throw StaleCacheError("apply_distortion: cache age " + std::to_string(cache.age) +
                          " reached refresh interval " +
                          std::to_string(cache.refresh_interval));

  ++cache.age;
  // On the unchanged tile the stored conversion is returned as-is, so a
  // refresh/apply pair reproduces the engine output exactly.
  if (ideal.g == cache.g_at_refresh)
    return ConductanceTile(ideal.config, cache.g_non_at_refresh);
  Eigen::MatrixXd gn = ideal.g.array() * (1.0 - cache.d.array());
  return ConductanceTile(ideal.config, std::move(gn));
}

}  // namespace xbarsim::circuit
