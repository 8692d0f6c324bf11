"""Shallow dependency analysis of product names.

Product names are almost always noun phrases with optional trailing
attachments ("Twisty Pins for Upholstery, Slipcovers, ... 50/pkg"). The
root is taken as the head of the first noun phrase: the last nominal token
before a function-word or punctuation boundary. Core words are the
lemmatized content tokens in a one-token window around the root.
"""

from .lexicon import (
    DETERMINERS,
    STOPWORDS,
    has_non_alpha,
    is_content,
    is_nominal,
    lemmatize,
    strip_punct,
)


def first_noun_phrase(name_tokens):
    """Token indexes of the leading noun phrase of a product name."""
    phrase = []
    for i, token in enumerate(name_tokens):
        clean = strip_punct(token)
        if not clean or has_non_alpha(clean):
            break
        lower = clean.lower()
        if lower in STOPWORDS and lower not in DETERMINERS:
            break
        if lower not in DETERMINERS:
            phrase.append(i)
        if clean != token:  # trailing punctuation closes the phrase
            break
    return phrase


def name_root(name_tokens):
    """Index of the name's syntactic head, or None for an all-function name."""
    phrase = first_noun_phrase(name_tokens)
    if not phrase:
        return None
    for i in reversed(phrase):
        if is_nominal(name_tokens[i]):
            return i
    return phrase[-1]


def core_words(name_tokens):
    """Lemmas of the tokens around the name root (root plus one each side)."""
    root = name_root(name_tokens)
    if root is None:
        return []
    window = name_tokens[max(0, root - 1) : root + 2]
    return [lemmatize(t) for t in window if is_content(t)]
