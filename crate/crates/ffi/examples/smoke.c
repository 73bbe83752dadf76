/* Minimal C consumer of the neckflow interface.
 *
 * Build (from the workspace root, after `cargo build -p neckflow-ffi`):
 *   cc -std=c99 -I crates/ffi/include crates/ffi/examples/smoke.c \
 *      -L target/debug -lneckflow_ffi -lm -o smoke
 *   LD_LIBRARY_PATH=target/debug ./smoke
 */
#include "neckflow.h"
#include <stdio.h>
#include <string.h>

int main(void) {
    NfGeometry *geom = NULL;
    const char *cfg = "{\"geometry\": {\"epsilon\": 0.01, \"profile\": \"quadratic\"}}";
    if (nf_geometry_from_json(cfg, &geom) != NF_STATUS_OK) return 1;

    double d = 0.0;
    if (nf_delta(geom, 0.1, &d) != NF_STATUS_OK) return 2;
    if (d < 0.019 || d > 0.021) return 3;

    int region = 0;
    if (nf_classify(geom, 0.0, 0.0, &region) != NF_STATUS_OK || region != 3) return 4;

    NfFields *fields = NULL;
    if (nf_fields_new(geom, &fields) != NF_STATUS_OK) return 5;
    NfFieldEval ev;
    if (nf_fields_eval(fields, 1, 1, 0.0, 0.0, &ev) != NF_STATUS_OK) return 6;
    if (ev.velocity[0] < 0.49 || ev.velocity[0] > 0.51) return 7;

    /* errors surface as status codes plus a readable message */
    if (nf_delta(geom, 50.0, &d) != NF_STATUS_DOMAIN_ERROR) return 8;
    if (strlen(nf_last_error()) == 0) return 9;

    nf_fields_free(fields);
    nf_geometry_free(geom);
    printf("neckflow C smoke: ok (gap %.6f, shear rate %.1f)\n", d, ev.velocity_gradient[1]);
    return 0;
}
