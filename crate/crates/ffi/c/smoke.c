/* Minimal consumer of the C API: free-potential s(λ) and a scenario hash. */
#include <math.h>
#include <stdio.h>
#include "hexqg.h"

int main(void) {
    double s = 0.0;
    if (hexqg_s_value(NULL, 0, 4.0, &s) != HEXQG_STATUS_OK) return 10;
    if (fabs(s - sin(2.0) / 2.0) > 1e-12) return 11;

    HexqgScenario *sc = NULL;
    if (hexqg_scenario_from_json("{\"domain\":{\"N\":2}}", &sc) != HEXQG_STATUS_OK) return 12;
    char hash[65];
    size_t len = 0;
    if (hexqg_scenario_hash(sc, hash, sizeof hash, &len) != HEXQG_STATUS_OK || len != 64) return 13;
    hexqg_scenario_free(sc);

    if (hexqg_scenario_from_json("{\"domain\":{}}", &sc) != HEXQG_STATUS_VALIDATION) return 14;
    char msg[256];
    hexqg_last_error(msg, sizeof msg, &len);
    printf("ok %s\n", hash);
    return 0;
}
