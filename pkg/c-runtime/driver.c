/* Native cross-validation driver.
 *
 * The matcher asset is a translation-unit fragment, included here the same
 * way the harness splices it into generated programs.  cases.inc supplies
 * the corpus: constructor functions, the subject table, and the verdicts
 * the reference matcher produced.
 */

#include <stdio.h>

#include "matcher.c"
#include "cases.inc"

int main(void) {
    unsigned long checked = 0;
    unsigned long mismatches = 0;
    unsigned long p;
    long s;

    for (p = 0; p < sizeof(cases) / sizeof(cases[0]); p++) {
        for (s = 0; s < SUBJECT_COUNT; s++) {
            int got = cases[p].fn(subjects[s]) ? 1 : 0;
            int want = (cases[p].expected[s >> 3] >> (s & 7)) & 1;
            if (got != want) {
                mismatches++;
                if (mismatches <= 10) {
                    fprintf(stderr,
                            "mismatch: pattern %s subject \"%s\" native %d reference %d\n",
                            cases[p].pattern, subjects[s], got, want);
                }
            }
            checked++;
        }
    }
    printf("checked %lu pairs, %lu mismatches\n", checked, mismatches);
    return mismatches ? 1 : 0;
}
