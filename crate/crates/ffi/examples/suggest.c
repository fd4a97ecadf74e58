/* Print ranked suggestions for a prefix.
 *
 *   cc examples/suggest.c -Iinclude -L../../target/debug -lqac_ffi -o suggest
 *   ./suggest index.bin model.bin "black l"
 */
#include <stdio.h>

#include "qac.h"

int main(int argc, char **argv) {
  if (argc != 4) {
    fprintf(stderr, "usage: %s INDEX MODEL PREFIX\n", argv[0]);
    return 2;
  }
  QacEngine *engine = NULL;
  if (qac_engine_open(argv[1], argv[2], &engine) != QAC_STATUS_OK) {
    fprintf(stderr, "open: %s\n", qac_last_error());
    return 1;
  }
  QacSuggestions *s = NULL;
  QacStatus st = qac_suggest(engine, argv[3], QAC_DEVICE_DESKTOP_BROWSER, NULL, 0, 10, &s);
  if (st != QAC_STATUS_OK) {
    fprintf(stderr, "suggest (%d): %s\n", (int)st, qac_last_error());
    qac_engine_free(engine);
    return 1;
  }
  for (size_t i = 0; i < qac_suggestions_len(s); i++) {
    printf("%s\t%.6f\t%s\n", qac_suggestion_text(s, i), qac_suggestion_score(s, i),
           qac_suggestion_is_exact(s, i) ? "exact" : "fuzzy");
  }
  qac_suggestions_free(s);
  qac_engine_free(engine);
  return 0;
}
