#include <math.h>
#include <stdio.h>
#include "eab_ffi.h"

#define N 600

int main(void) {
    double x[N];
    for (int i = 0; i < N; i++) {
        double t = 0.1 * i;
        double v = (t > 20.0 && t < 30.0) ? 8.0 : 18.0;
        x[i] = (i == 0) ? 0.0 : x[i - 1] + 0.1 * v;
    }
    EabTrajectory *leader = NULL;
    if (eab_trajectory_new("lead", 0.0, 0.1, x, NULL, N, &leader) != EAB_STATUS_OK) {
        fprintf(stderr, "trajectory: %s\n", eab_last_error());
        return 1;
    }
    EabTrajectory *newell = NULL;
    EabTrajectory *sim = NULL;
    double theta[8] = {1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 5.0};
    if (eab_newell_shift(leader, 1.2, 8.0, &newell) != EAB_STATUS_OK ||
        eab_simulate_follower(leader, 1.2, 8.0, theta, &sim) != EAB_STATUS_OK) {
        fprintf(stderr, "simulate: %s\n", eab_last_error());
        return 1;
    }
    double a[N], b[N];
    size_t na = 0, nb = 0;
    eab_trajectory_positions(newell, a, N, &na);
    eab_trajectory_positions(sim, b, N, &nb);
    if (na != N || nb != N) {
        return 2;
    }
    for (int i = 0; i < N; i++) {
        if (fabs(a[i] - b[i]) > 1e-6) {
            fprintf(stderr, "sample %d differs: %f vs %f\n", i, a[i], b[i]);
            return 3;
        }
    }
    if (eab_trajectory_new("bad", 0.0, 0.1, NULL, NULL, 3, &sim) != EAB_STATUS_NULL_POINTER) {
        return 4;
    }
    eab_trajectory_free(sim);
    eab_trajectory_free(newell);
    eab_trajectory_free(leader);
    printf("ok %s\n", eab_version());
    return 0;
}
