"""Rule-based cleanup applied after decoding: BILOU repair, abbreviation
linking, and the chemical-formula override.

The repair automaton fixes label sequences that violate the BILOU chunk
grammar (a decoder constrained by :func:`seal.crf.bilou_mask` never needs
it, but an unconstrained argmax does).  Abbreviation detection pairs a
parenthesised short form with the long form immediately before it so that
later mentions of the short form inherit the long form's predicted class.
The formula rule promotes spans containing chemical formulae to Material.
"""

from __future__ import annotations

import dataclasses
import functools
from importlib import resources

from .corpus import Bilou, Document, KeyphraseSpan

__all__ = [
    "AbbrevEntry",
    "repair_bilou",
    "detect_abbreviations",
    "propagate_abbrev_class",
    "chemical_formula_rule",
    "force_material_for_formulae",
    "element_symbols",
]


# ---------------------------------------------------------------------------
# BILOU repair
# ---------------------------------------------------------------------------


def repair_bilou(labels: list[Bilou]) -> list[Bilou]:
    """Return a valid BILOU sequence, changing as few labels as possible.

    Rules: an ``I`` or ``L`` with no open chunk opens one (``I``) or becomes
    ``U`` (``L``); a chunk left dangling (followed by ``O``/``U``/``B`` or
    the end of the sequence) is closed in place — a length-1 chunk becomes
    ``U``, otherwise its last label becomes ``L``.  Valid sequences are
    returned unchanged and the function is idempotent.
    """
    out: list[Bilou] = []
    open_chunk: list[int] = []  # positions (in ``out``) of the open chunk

    def close_dangling() -> None:
        if not open_chunk:
            return
        if len(open_chunk) == 1:
            out[open_chunk[0]] = Bilou.U
        else:
            out[open_chunk[-1]] = Bilou.L
        open_chunk.clear()

    for raw in labels:
        label = Bilou(raw)
        if open_chunk and label in (Bilou.I, Bilou.L):
            out.append(label)
            if label is Bilou.L:
                open_chunk.clear()
            else:
                open_chunk.append(len(out) - 1)
            continue
        close_dangling()
        if label is Bilou.B:
            out.append(Bilou.B)
            open_chunk.append(len(out) - 1)
        elif label is Bilou.I:  # continuation with nothing to continue
            out.append(Bilou.B)
            open_chunk.append(len(out) - 1)
        elif label is Bilou.L:  # close with nothing open
            out.append(Bilou.U)
        else:
            out.append(label)
    close_dangling()
    return out


# ---------------------------------------------------------------------------
# Abbreviations
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class AbbrevEntry:
    """First occurrence of ``<long form> ( <short> )`` in a document.

    Token indices refer to ``doc.tokens``; ``long_start:long_end`` is the
    half-open range of the long form and ``short_pos`` the index of the
    short-form token between the parentheses.
    """

    short: str
    long_start: int
    long_end: int
    short_pos: int


def _is_short_form(surface: str) -> bool:
    if not 2 <= len(surface) <= 10:
        return False
    strong = sum(1 for c in surface if c.isupper() or c.isdigit())
    return strong / len(surface) >= 0.6


def detect_abbreviations(doc: Document) -> dict[str, AbbrevEntry]:
    """Find ``<long form> ( <SHORT> )`` definitions, first occurrence only.

    The short form must be 2-10 characters with at least 60% uppercase
    letters or digits; the long form is taken as the N tokens immediately
    before the opening parenthesis, where N is the number of alphabetic
    characters in the short form.
    """
    entries: dict[str, AbbrevEntry] = {}
    tokens = doc.tokens
    for i in range(1, len(tokens) - 2):
        if tokens[i].surface != "(" or tokens[i + 2].surface != ")":
            continue
        short = tokens[i + 1].surface
        if short in entries or not _is_short_form(short):
            continue
        n_alpha = sum(1 for c in short if c.isalpha())
        if n_alpha == 0 or i - n_alpha < 0:
            continue
        entries[short] = AbbrevEntry(
            short=short, long_start=i - n_alpha, long_end=i, short_pos=i + 1
        )
    return entries


def propagate_abbrev_class(
    doc: Document,
    spans: list[KeyphraseSpan],
    abbrevs: dict[str, AbbrevEntry],
) -> list[KeyphraseSpan]:
    """Give short-form spans the class predicted for their long form.

    For each abbreviation entry, the long form's class is read from the
    span (if any) whose character range exactly covers the long-form
    tokens.  Every span whose surface equals a known short form is then
    re-labelled with that class; long-form spans are left unchanged.  If no
    span covers the long form, the entry propagates nothing.
    """
    klass_by_short: dict[str, str] = {}
    for short, entry in abbrevs.items():
        lo = doc.tokens[entry.long_start].start
        hi = doc.tokens[entry.long_end - 1].end
        for span in spans:
            if span.start == lo and span.end == hi and span.klass is not None:
                klass_by_short[short] = span.klass
                break
    out = []
    for span in spans:
        klass = klass_by_short.get(span.surface)
        if klass is not None and klass != span.klass:
            span = dataclasses.replace(span, klass=klass)
        out.append(span)
    return out


# ---------------------------------------------------------------------------
# Chemical formulae
# ---------------------------------------------------------------------------

# Single-symbol tokens that collide with ordinary words or initials.  These
# only fire with a count digit or a second element group ("O2", "InP"), never
# bare.  All one-letter symbols are guarded, plus the two-letter offenders.
_AMBIGUOUS_BARE = frozenset(
    {"H", "B", "C", "N", "O", "F", "P", "S", "K", "V", "Y", "I", "W", "U"}
    | {"In", "As", "At", "No", "He", "Be"}
)


@functools.lru_cache(maxsize=1)
def element_symbols() -> frozenset[str]:
    """The 118 IUPAC element symbols, loaded from package data."""
    text = (
        resources.files("seal.data").joinpath("element_symbols.txt").read_text("utf-8")
    )
    return frozenset(line for line in text.splitlines() if line)


def _parse_element_groups(surface: str) -> list[tuple[str, str]] | None:
    """Greedily split ``surface`` into (symbol, digits) groups, or None.

    Matching is case-sensitive; at each position the two-character symbol is
    tried before the one-character symbol.  Returns None unless the whole
    token is consumed.
    """
    symbols = element_symbols()
    groups: list[tuple[str, str]] = []
    i = 0
    while i < len(surface):
        if surface[i : i + 2] in symbols:
            sym = surface[i : i + 2]
            i += 2
        elif surface[i] in symbols:
            sym = surface[i]
            i += 1
        else:
            return None
        j = i
        while j < len(surface) and surface[j].isdigit():
            j += 1
        groups.append((sym, surface[i:j]))
        i = j
    return groups


def chemical_formula_rule(surface: str) -> bool:
    """True when a token reads as a chemical formula.

    Fires on two or more element groups ("NaCl", "InP", "Al2O3"), or on a
    single group with a count digit ("O2"), or on a bare symbol that is not
    in the ambiguous guard list ("Mg", "Fe" — but not "I", "In" or "He").
    """
    groups = _parse_element_groups(surface)
    if not groups:
        return False
    if len(groups) >= 2:
        return True
    sym, digits = groups[0]
    if digits:
        return True
    return sym not in _AMBIGUOUS_BARE


def force_material_for_formulae(
    doc: Document, spans: list[KeyphraseSpan]
) -> list[KeyphraseSpan]:
    """Set ``klass="Material"`` on spans containing a formula token."""
    out = []
    for span in spans:
        fires = any(
            tok.start >= span.start
            and tok.end <= span.end
            and chemical_formula_rule(tok.surface)
            for tok in doc.tokens
        )
        if fires and span.klass != "Material":
            span = dataclasses.replace(span, klass="Material")
        out.append(span)
    return out
