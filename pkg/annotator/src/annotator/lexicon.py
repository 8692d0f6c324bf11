"""Word lists and the lemmatizer shared by parsing and coreference."""

import re

THIRD_PERSON_PRONOUNS = frozenset(
    "it its they them their theirs this that these those".split()
)
PLURAL_PRONOUNS = frozenset("they them their theirs these those".split())
SINGULAR_PRONOUNS = THIRD_PERSON_PRONOUNS - PLURAL_PRONOUNS

DETERMINERS = frozenset("the a an this that these those my our your".split())

STOPWORDS = frozenset(
    """a an the and or but for of with to in on by from at as per is are was
    were be been being am do does did not no yes so such very more most over
    under into out up down off than then too also just about after before
    because while when where how why what who i we you he she me us him her
    my our your his hers mine yours ours would could should will can may
    might must have has had get gets got really quite still even again
    once""".split()
) | THIRD_PERSON_PRONOUNS

# frequent review verbs/adjectives that should never become mention heads;
# normalized through the lemmatizer below so membership tests on lemmas hit
_NON_NOMINAL_RAW = """love loved like liked work works worked working look
    looks looked arrive arrived arrives packed shipped ordered answered
    dented promised expected described smelled trapped worked broke break
    breaks buy bought rebuy recommend recommended fit fits fitting hold
    holds held use used using keeps keeping sounds feels performs folds
    drains boils great good bad nice fine solid cheap sturdy perfect happy
    small large big little easy hard long short new old fast slow funny
    early earlier definitely honestly exactly quickly single heavy odd
    second charm""".split()

_IRREGULAR_NOUNS = {
    "children": "child",
    "feet": "foot",
    "men": "man",
    "women": "woman",
    "teeth": "tooth",
    "mice": "mouse",
    "knives": "knife",
    "shelves": "shelf",
    "leaves": "leaf",
}
_IRREGULAR_VERBS = {
    "went": "go",
    "got": "get",
    "bought": "buy",
    "made": "make",
    "came": "come",
    "took": "take",
    "held": "hold",
    "broke": "break",
}

_EDGE_PUNCT = re.compile(r"^[^0-9A-Za-z]+|[^0-9A-Za-z]+$")
_HAS_NON_ALPHA = re.compile(r"[^A-Za-z]")
_SAFE_DOUBLES = ("ll", "ss", "ee", "oo", "zz")


def strip_punct(token):
    return _EDGE_PUNCT.sub("", token)


def has_non_alpha(token):
    return bool(_HAS_NON_ALPHA.search(token))


def lemmatize(token):
    w = strip_punct(token).lower()
    if not w:
        return ""
    if w in _IRREGULAR_NOUNS:
        return _IRREGULAR_NOUNS[w]
    if w in _IRREGULAR_VERBS:
        return _IRREGULAR_VERBS[w]
    if w in STOPWORDS or len(w) <= 3:
        return w
    if w.endswith("sses"):
        return w[:-2]
    if w.endswith("ies") and len(w) > 4:
        return w[:-3] + "y"
    if len(w) > 4 and w.endswith(("xes", "zes", "ches", "shes")):
        return w[:-2]
    if w.endswith("ing") and len(w) >= 6:
        return _undouble(w[:-3])
    if w.endswith("ed") and len(w) >= 5:
        return _undouble(w[:-2])
    if w.endswith("s") and not w.endswith("ss"):
        return w[:-1]
    return w


def _undouble(stem):
    if len(stem) >= 3 and stem[-1] == stem[-2] and stem[-2:] not in _SAFE_DOUBLES:
        return stem[:-1]
    return stem


NON_NOMINAL = frozenset(lemmatize(w) for w in _NON_NOMINAL_RAW)


def is_content(token):
    lemma = lemmatize(token)
    return bool(lemma) and lemma not in STOPWORDS


def is_nominal(token):
    """Crude noun test: content word that is not a known verb/adjective."""
    lemma = lemmatize(token)
    return bool(lemma) and lemma not in STOPWORDS and lemma not in NON_NOMINAL


def looks_plural(token):
    surface = strip_punct(token).lower()
    return surface.endswith("s") and not surface.endswith("ss")
