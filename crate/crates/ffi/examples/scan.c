/* Minimal consumer of the qcollide C API: runs a small convergence scan and
 * prints one line per ensemble size. */
#include <stdio.h>
#include <stdlib.h>

#include "qcollide.h"

static int check(QcStatus status, const char *what) {
    if (status != QC_STATUS_OK) {
        const char *msg = qc_last_error_message();
        fprintf(stderr, "%s failed (%d): %s\n", what, (int)status, msg ? msg : "?");
        return 1;
    }
    return 0;
}

int main(void) {
    const char *config =
        "{\"n_qubits\": 2, \"n_collisions\": 10, \"k_list\": [16, 64, 256], \"seed\": 7}";
    QcExperiment *exp = NULL;
    if (check(qc_experiment_from_json(config, &exp), "parse")) return 1;

    QcScanResult *scan = NULL;
    if (check(qc_experiment_scan(exp, 1, &scan), "scan")) return 1;

    size_t rows = qc_scan_result_len(scan);
    for (size_t i = 0; i < rows; i++) {
        QcConvergenceRow row;
        if (check(qc_scan_result_row(scan, i, &row), "row")) return 1;
        printf("%llu,%llu,%.17g,%.17g\n", (unsigned long long)row.k,
               (unsigned long long)row.n_collisions, row.d, row.max_elem_dev);
    }
    double slope = 0.0;
    if (check(qc_scan_result_slope(scan, &slope), "slope")) return 1;
    printf("slope %.6f\n", slope);

    double re[16], im[16];
    if (check(qc_experiment_exact_density(exp, re, im, 16), "exact")) return 1;
    printf("trace %.12f\n", re[0] + re[5] + re[10] + re[15]);

    qc_scan_result_free(scan);
    qc_experiment_free(exp);
    return 0;
}
