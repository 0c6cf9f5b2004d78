#include <stdio.h>
#include <stdlib.h>
#include "unrealdc.h"

static const char *MAP =
    "#######\n"
    "#S..O.#\n"
    "#..M..#\n"
    "#######\n";

int main(int argc, char **argv) {
    if (argc < 2) {
        return 10;
    }
    UdcEnv *env = NULL;
    if (udc_env_new(MAP, 3, 8, 8, false, UDC_ROLE_ACTION, &env) != UDC_STATUS_OK) {
        fprintf(stderr, "%s\n", udc_last_error());
        return 1;
    }
    UdcAgent *agent = NULL;
    if (udc_agent_load(argv[1], true, &agent) != UDC_STATUS_OK) {
        fprintf(stderr, "%s\n", udc_last_error());
        return 2;
    }
    int steps = 0;
    double total = 0.0;
    while (!udc_env_is_terminal(env) && steps < 50) {
        uint32_t action;
        int32_t choice;
        if (udc_agent_act(agent, env, &action, &choice) != UDC_STATUS_OK) {
            return 3;
        }
        double r;
        bool done;
        UdcEvents ev;
        if (udc_env_step(env, action, &r, &done, &ev) != UDC_STATUS_OK) {
            return 4;
        }
        total += r;
        steps++;
    }
    if (udc_env_step(env, 99, NULL, NULL, NULL) != UDC_STATUS_INVALID_ARGUMENT) {
        return 5;
    }
    double a[] = {1, 2, 3, 4, 5};
    double b[] = {2, 3, 4, 5, 6};
    UdcTTest t;
    if (udc_welch_t_test(a, 5, b, 5, &t) != UDC_STATUS_OK || !t.defined) {
        return 6;
    }
    printf("steps %d return %.3f t %.6f df %.6f p %.6f\n", steps, total, t.t, t.df, t.p);
    udc_agent_free(agent);
    udc_env_free(env);
    return 0;
}
