#include <math.h>
#include <stdio.h>
#include "nqs.h"

int main(void) {
    uint64_t space = 0;
    if (nqs_search_space_size(20, 14, 1, &space) != NQS_STATUS_OK || space != 14400) return 1;

    NqsCurve *curve = NULL;
    if (nqs_curve_new(NQS_METRIC_VSCORE, 1.34e-6, 0.197, 7.25e-3, 7.952, 2.371, &curve) != NQS_STATUS_OK) return 2;
    double a = 0.0, b = 0.0;
    if (nqs_curve_frontier(curve, &a, &b) != NQS_STATUS_OK) return 3;
    nqs_curve_free(curve);
    if (fabs(b - 3.354) > 2e-3) return 4;

    NqsHamiltonian *h = NULL;
    if (nqs_hamiltonian_parse("%n_qubits 1\n1.0 Z\n", &h) != NQS_STATUS_OK) return 5;
    double e = 0.0;
    if (nqs_hamiltonian_ground_energy(h, &e) != NQS_STATUS_OK || fabs(e + 1.0) > 1e-12) return 6;
    nqs_hamiltonian_free(h);

    if (nqs_hamiltonian_parse(NULL, &h) != NQS_STATUS_NULL_POINTER || nqs_last_error() == NULL) return 7;
    printf("frontier %.3f N^%.3f\n", a, b);
    return 0;
}
