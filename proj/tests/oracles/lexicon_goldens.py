#!/usr/bin/env python3
"""Independent oracle for lexicon golden tests.

Parses data/lexicon/default.lex and evaluates each golden sentence with
Python's `re` (Unicode-aware, IGNORECASE). The printed group sets are frozen
into tests/unit/lexicon_test.cc and tests/acceptance/acceptance.cc.
"""
import pathlib
import re
import sys

ROOT = pathlib.Path(__file__).resolve().parents[2]


def load(path):
    groups, current = {}, None
    for raw in path.read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = re.fullmatch(r"\[group:(\w+)\]", line)
        if m:
            current = m.group(1)
            groups[current] = {"positive": [], "negative": []}
            continue
        key, _, value = raw.partition("=")
        groups[current][key.strip()].append(value)
    return groups


def hits(groups, sentence):
    out = []
    for name, g in groups.items():
        pos = any(re.search(p, sentence, re.IGNORECASE) for p in g["positive"])
        neg = any(re.search(p, sentence, re.IGNORECASE) for p in g["negative"])
        if pos and not neg:
            out.append(name)
    return out


SENTENCES = [
    # the original example sentences
    "Massiimmigratsioon oleks Euroopale hukatuslik ja see ei lahendaks maailmas mitte midagi.",
    "Vähegi kahtlased siin viibivad migrandid tuleb turvalisuse huvides Eestist välja saata.",
    "Demokraadid süüdistavad administratsiooni pandeemia kasutamises sisserände vastu.",
    "70% ettevõtte töötajatest on välismaalased.",
    "Protsess, et saada siin elamisluba, ei olnud väga keeruline.",
    "Hispaania valitsus teatas teisipäeval, et lihtsustab reegleid migrantidele ja töötutele põllumajanduses töö saamiseks koroonaviiruse pandeemia ajal.",
    "Jääb vaid küsida — millal ka liibüalased käega löövad ja toimuval vabavoolus minna lasevad, kui Euroopa vaid räägib rändekriisi ohjeldamisest, ise aga valab õli tulle?",
    "Varasemalt vaevasid Kristiinat sagedased migreenid, mis võisid naist halvata ja sundida ta terveks päevaks voodisse, kus ainus võimalus hakkama saada oli hoida tekki pea peal ja kõrvasid kinni.",
    # negative filter and operation examples
    "lindude ränne algas",
    "Lindude ränne algas sel aastal varem.",
    "Tema migreen ei lasknud tal rändest rääkida.",
    "Välistudengid saabusid",
    "Pagulased ja moslemid saabusid.",
    # race boundary tokens
    "Neeger ja rassism",
    "Mõneeger",
    "terrassil istuti",
]

if __name__ == "__main__":
    groups = load(ROOT / "data" / "lexicon" / "default.lex")
    assert len(groups) == 8, groups.keys()
    for s in SENTENCES:
        print(f"{hits(groups, s)!r:60} <- {s[:70]}")
    sys.exit(0)
