typedef enum { OR, SEQ, STAR, RANGE } RegexOp;
typedef struct Regex Regex;
struct Regex {
    RegexOp op; int clo; int chi;
    Regex* left; Regex* right;
};
typedef struct RegexCont RegexCont;
struct RegexCont {
    Regex* regex;
    RegexCont* next;
};
// Matching logic for a regular expression with a
// continuation.
static int match_cont(Regex* regex, RegexCont* cont,
char *text) {
  if (regex == NULL) {return *text == '\0';}
  if (regex->op == OR) {
    return match_cont(regex->left, cont, text) ||
    match_cont(regex->right, cont, text);
  }
  if (regex->op == SEQ) {
    RegexCont c;
    c.next = cont; c.regex = regex->right;
    return match_cont(regex->left, &c, text);
  }
  if (regex->op == STAR) {
    Regex r; r.op = SEQ; r.left = regex->left;
    r.right = regex;
    return match_cont(cont->regex, cont->next, text) ||
    (*text != '\0' && match_cont(&r, cont, text));
  }
  if (regex->op == RANGE) {
    char c = *text++;
    return c != '\0' && c >= regex->clo &&
    c <= regex->chi &&
    match_cont(cont->regex, cont->next, text);
  }
  return 0;
}
// Matching logic for a regular expression.
static int match(Regex* regex, char *text) {
  RegexCont cont;
  cont.next = NULL; cont.regex = NULL;
  return match_cont(regex, &cont, text);
}
