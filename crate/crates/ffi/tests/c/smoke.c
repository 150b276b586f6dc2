#include <stdio.h>
#include <string.h>

#include "blocker.h"

#define CHECK(call)                                                        \
    do {                                                                   \
        BlockerStatus s_ = (call);                                         \
        if (s_ != BLOCKER_STATUS_OK) {                                     \
            char msg_[256];                                                \
            blocker_last_error_message(msg_, sizeof msg_);                 \
            fprintf(stderr, "%s failed: %d %s\n", #call, (int)s_, msg_);   \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(void) {
    BlockerNetlist *net = NULL;
    CHECK(blocker_netlist_sample_multiplier(&net));

    /* 13 * 11, operands LSB first. */
    unsigned char in[8], out[8];
    size_t n = 0;
    for (int i = 0; i < 4; i++) {
        in[i] = (13 >> i) & 1;
        in[4 + i] = (11 >> i) & 1;
    }
    CHECK(blocker_netlist_evaluate(net, in, 8, out, sizeof out, &n));
    unsigned product = 0;
    for (size_t i = 0; i < n; i++) product |= (unsigned)out[i] << i;
    if (product != 143) {
        fprintf(stderr, "product %u\n", product);
        return 1;
    }

    unsigned char key[40];
    for (int i = 0; i < 40; i++) key[i] = (i * 7) % 3 == 1;
    BlockerBitstream *bs = NULL;
    CHECK(blocker_obfuscate(net, key, sizeof key, 11, &bs));
    double match = 0.0;
    CHECK(blocker_functional_match(bs, key, sizeof key, net, &match));
    if (match != 1.0) return 1;
    key[0] ^= 1;
    CHECK(blocker_functional_match(bs, key, sizeof key, net, &match));
    if (match >= 1.0) return 1;

    BlockerPuf *puf = NULL;
    if (blocker_puf_new(NULL, 64, 0.0, 1, &puf) != BLOCKER_STATUS_NULL_ARGUMENT) return 1;
    if (blocker_last_error_length() == 0) return 1;

    blocker_bitstream_free(bs);
    blocker_netlist_free(net);
    printf("ok %s\n", blocker_version());
    return 0;
}
