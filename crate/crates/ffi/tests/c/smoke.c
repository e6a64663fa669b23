#include <math.h>
#include <stdio.h>
#include <string.h>

#include "imagnoise.h"

#define CHECK(cond)                                                  \
    do {                                                             \
        if (!(cond)) {                                               \
            fprintf(stderr, "%s:%d: %s\n", __FILE__, __LINE__, #cond); \
            return 1;                                                \
        }                                                            \
    } while (0)

int main(void) {
    ImnChannel ch = {2, 0, 1.0};
    ImnSpec *spec = NULL;
    CHECK(imn_spec_new(&ch, 1, &spec) == IMN_STATUS_OK);

    ImnDistribution *p0 = NULL;
    CHECK(imn_distribution_point_mass(2, 2, &p0) == IMN_STATUS_OK);

    ImnDistribution *pt = NULL;
    CHECK(imn_master_evolve(spec, p0, 2, 1.0, 1e-12, &pt) == IMN_STATUS_OK);
    double probs[3];
    size_t len = 0;
    CHECK(imn_distribution_probs(pt, probs, 3, &len) == IMN_STATUS_OK);
    CHECK(len == 3);
    CHECK(fabs(probs[2] - exp(-1.0)) < 1e-9);

    double small[1];
    CHECK(imn_distribution_probs(pt, small, 1, &len) == IMN_STATUS_BUFFER_TOO_SMALL);
    CHECK(len == 3);

    ImnDistribution *bad = NULL;
    CHECK(imn_distribution_point_mass(5, 2, &bad) != IMN_STATUS_OK);
    CHECK(imn_last_error() != NULL && strlen(imn_last_error()) > 0);

    ImnModulusBounds b = imn_modulus_bounds(0.5, 1.0);
    CHECK(fabs(b.lower - 0.5) < 1e-12);

    ImnComplex xi = {3.0, 0.0};
    ImnComplex m = imn_expected_reciprocal(xi, log(2.0));
    CHECK(fabs(m.re - 2.0) < 1e-12);

    imn_distribution_free(pt);
    imn_distribution_free(p0);
    imn_distribution_free(NULL);
    imn_spec_free(spec);
    printf("ok %s\n", imn_version());
    return 0;
}
