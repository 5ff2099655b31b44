#include <stdio.h>
#include "depol.h"

int main(void) {
    double v = 0.0;
    DepolStatus s = depol_laplace_check(30.0, 30.0, &v);
    if (s != DEPOL_STATUS_OK) {
        fprintf(stderr, "%s\n", depol_last_error_message());
        return 1;
    }
    DepolBathParams *p = NULL;
    if (depol_bath_params_reference_fit(&p) != DEPOL_STATUS_OK) return 1;
    double t = 0.0;
    s = depol_spinlock_lifetime(p, 10.0, 0.0, DEPOL_SPIN_LOCK_MODE_IDEAL, 10000, 1, &t);
    depol_bath_params_free(p);
    printf("%s %.6f %.3f\n", depol_version(), v, t);
    return s == DEPOL_STATUS_OK ? 0 : 1;
}
