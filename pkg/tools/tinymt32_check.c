/* Standalone TinyMT32 (Saito & Matsumoto reference algorithm) used to
 * regenerate tests/fixtures/tinymt32_*.txt.
 *   cc -O2 -o tinymt32_check tools/tinymt32_check.c
 *   ./tinymt32_check <seed> <mat1> <mat2> <tmat> <count>
 */
#include <stdint.h>
#include <stdio.h>
#include <stdlib.h>

#define TINYMT32_SH0 1
#define TINYMT32_SH1 10
#define TINYMT32_SH8 8
#define TINYMT32_MASK UINT32_C(0x7fffffff)
#define MIN_LOOP 8
#define PRE_LOOP 8

typedef struct {
    uint32_t status[4];
    uint32_t mat1, mat2, tmat;
} tinymt32_t;

static void next_state(tinymt32_t *r) {
    uint32_t x, y;
    y = r->status[3];
    x = (r->status[0] & TINYMT32_MASK) ^ r->status[1] ^ r->status[2];
    x ^= (x << TINYMT32_SH0);
    y ^= (y >> TINYMT32_SH0) ^ x;
    r->status[0] = r->status[1];
    r->status[1] = r->status[2];
    r->status[2] = x ^ (y << TINYMT32_SH1);
    r->status[3] = y;
    r->status[1] ^= -((int32_t)(y & 1)) & r->mat1;
    r->status[2] ^= -((int32_t)(y & 1)) & r->mat2;
}

static uint32_t temper(tinymt32_t *r) {
    uint32_t t0, t1;
    t0 = r->status[3];
    t1 = r->status[0] + (r->status[2] >> TINYMT32_SH8);
    t0 ^= t1;
    t0 ^= -((int32_t)(t1 & 1)) & r->tmat;
    return t0;
}

static void init(tinymt32_t *r, uint32_t seed) {
    r->status[0] = seed;
    r->status[1] = r->mat1;
    r->status[2] = r->mat2;
    r->status[3] = r->tmat;
    for (int i = 1; i < MIN_LOOP; i++) {
        r->status[i & 3] ^= i + UINT32_C(1812433253)
            * (r->status[(i - 1) & 3] ^ (r->status[(i - 1) & 3] >> 30));
    }
    if ((r->status[0] & TINYMT32_MASK) == 0 && r->status[1] == 0
        && r->status[2] == 0 && r->status[3] == 0) {
        r->status[0] = 'T'; r->status[1] = 'I';
        r->status[2] = 'N'; r->status[3] = 'Y';
    }
    for (int i = 0; i < PRE_LOOP; i++) next_state(r);
}

int main(int argc, char **argv) {
    if (argc != 6) { fprintf(stderr, "usage: seed mat1 mat2 tmat count\n"); return 1; }
    tinymt32_t r;
    uint32_t seed = (uint32_t)strtoul(argv[1], NULL, 0);
    r.mat1 = (uint32_t)strtoul(argv[2], NULL, 0);
    r.mat2 = (uint32_t)strtoul(argv[3], NULL, 0);
    r.tmat = (uint32_t)strtoul(argv[4], NULL, 0);
    int n = atoi(argv[5]);
    init(&r, seed);
    printf("# seed=%u mat1=%08x mat2=%08x tmat=%08x\n", seed, r.mat1, r.mat2, r.tmat);
    for (int i = 0; i < n; i++) printf("%08x\n", temper((next_state(&r), &r)));
    return 0;
}
