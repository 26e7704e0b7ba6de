#include <math.h>
#include <stdio.h>
#include <string.h>

#include "mpstream.h"

#define CHECK(cond)                                                        \
  do {                                                                     \
    if (!(cond)) {                                                         \
      fprintf(stderr, "line %d: %s (%s)\n", __LINE__, #cond,               \
              mps_last_error_message());                                   \
      return 1;                                                            \
    }                                                                      \
  } while (0)

int main(void) {
  MpsLinkSet *set = mps_linkset_new();
  CHECK(set != NULL);
  CHECK(mps_linkset_add_exponential(set, 0.55) == MPS_STATUS_OK);
  CHECK(mps_linkset_add_exponential(set, 0.55) == MPS_STATUS_OK);

  MpsRegime regime;
  CHECK(mps_linkset_regime(set, &regime) == MPS_STATUS_OK);
  CHECK(regime == MPS_REGIME_UNDERLOAD);

  uint32_t links[6];
  CHECK(mps_schedule(set, 6, links) == MPS_STATUS_OK);
  CHECK(links[0] == 1 && links[1] == 2);

  MpsEstimate est;
  CHECK(mps_estimate_starvation(set, 500, 10.0, 2000, 3, 1, &est) == MPS_STATUS_OK);
  double bound;
  CHECK(mps_chernoff_bound(set, 500, 9.0, MPS_VARIANT_PRODUCT, false, &bound) == MPS_STATUS_OK);
  CHECK(est.runs == 2000);
  CHECK(bound >= est.p_hat - 3 * est.std_error);

  MpsPrebuffer pb;
  CHECK(mps_select_prebuffer(set, 500, 0.01, MPS_VARIANT_PRODUCT, &pb) == MPS_STATUS_OK);
  CHECK(pb.achieved_bound <= 0.01 && !isnan(pb.closed_form));

  CHECK(mps_linkset_add_exponential(set, -1.0) == MPS_STATUS_VALIDATION);
  CHECK(strlen(mps_last_error_message()) > 0);
  CHECK(mps_chernoff_bound(NULL, 500, 1.0, MPS_VARIANT_PRODUCT, false, &bound) ==
        MPS_STATUS_NULL_POINTER);

  CHECK(fabs(mps_psi(0.0) - 0.5) < 1e-15);
  double v;
  CHECK(mps_asym_var_onoff(1.0, 1.0, &v) == MPS_STATUS_OK && fabs(v - 0.25) < 1e-15);

  mps_linkset_free(set);
  printf("ok %s\n", mps_version());
  return 0;
}
