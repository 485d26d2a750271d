"""Query -> normalized subject tags.

Maps an English event description to a short list of lowercase,
singularized class nouns ("person", "dog", "credits") naming the
grammatical subjects of the main action. Two interchangeable engines:
a deterministic rule engine (offline, reproducible) and a prompted
chat-LM endpoint whose reply is parsed into the same shape.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import AnswerParseError, BackendError

DEFAULT_TAG_BUDGET = 3

# --- closed-class lexicon -------------------------------------------------

DETERMINERS = {
    "a", "an", "the", "this", "that", "these", "those", "there", "each",
    "every", "either", "neither", "no", "any", "such", "what", "which",
}
POSSESSIVES = {"my", "your", "his", "her", "its", "our", "their", "whose"}
QUANTITY_WORDS = {
    "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
    "ten", "eleven", "twelve", "both", "several", "many", "few", "all",
    "most", "more", "less", "another", "other", "others", "lots", "plenty",
    "half", "dozen", "single", "multiple", "numerous", "various",
}
# nouns that act as transparent quantity heads in "<quant> of <noun>"
QUANTITY_OF_NOUNS = {
    "group", "groups", "couple", "pair", "pairs", "bunch", "crowd", "lot",
    "lots", "number", "series", "set", "row", "line", "team", "herd",
    "pack", "flock",
}
ADVERBS = {
    "then", "now", "also", "just", "still", "often", "always", "never",
    "sometimes", "usually", "quickly", "slowly", "suddenly", "finally",
    "again", "already", "soon", "later", "first", "meanwhile", "currently",
    "repeatedly", "continuously", "carefully", "together", "briefly",
}
SUBORDINATORS = {"while", "when", "after", "before", "if", "because",
                 "although", "though", "since", "once", "until", "as"}

# Pronouns (subject, object and vague forms) that denote people.
HUMAN_PRONOUNS = {
    "i", "you", "he", "she", "we", "they", "someone", "some", "everyone",
    "others", "anyone", "me", "him", "them", "us", "somebody", "everybody",
    "anybody", "nobody", "one",
}
HUMAN_NOUNS = {
    "man", "men", "woman", "women", "person", "people", "child", "children",
    "boy", "boys", "girl", "girls", "guy", "guys", "lady", "ladies", "kid",
    "kids", "baby", "babies", "player", "players", "worker", "workers",
}

PREPOSITIONS = {
    "of", "in", "on", "at", "with", "from", "to", "for", "by", "near",
    "under", "over", "behind", "across", "into", "onto", "inside",
    "outside", "during", "through", "against", "between", "without",
    "within", "along", "around", "above", "below", "beside", "off",
    "toward", "towards", "up", "down", "out", "about",
}
RELATIVIZERS = {"who", "whom", "which", "that", "where"}

AUX_VERBS = {
    "is", "are", "am", "was", "were", "be", "been", "being", "has", "have",
    "had", "does", "do", "did", "will", "would", "can", "could", "shall",
    "should", "may", "might", "must",
}

# Base forms of common action verbs; inflections are matched by suffix
# stripping in _is_lexicon_verb.
VERB_BASES = {
    "walk", "run", "sit", "stand", "hold", "play", "jump", "talk", "eat",
    "drink", "ride", "dance", "sing", "throw", "catch", "push", "pull",
    "open", "close", "look", "watch", "show", "wear", "climb", "swim",
    "fall", "move", "turn", "put", "take", "make", "go", "come", "get",
    "give", "use", "work", "cook", "clean", "wash", "cut", "read", "write",
    "smile", "laugh", "speak", "point", "lift", "carry", "kick", "hit",
    "drive", "instruct", "bend", "lean", "shake", "wave", "clap", "knock",
    "pour", "fill", "empty", "wipe", "brush", "comb", "dig", "plant",
    "feed", "chase", "follow", "lead", "enter", "leave", "arrive", "begin",
    "start", "stop", "finish", "continue", "try", "help", "place", "remove",
    "pick", "drop", "grab", "reach", "stretch", "spin", "roll", "slide",
    "skate", "ski", "surf", "row", "paddle", "fish", "hunt", "shoot",
    "punch", "wrestle", "exercise", "train", "appear", "perform", "stir",
    "mix", "bake", "fry", "serve", "sweep", "mop", "vacuum", "fold",
    "hang", "paint", "draw", "build", "fix", "repair", "measure", "weigh",
    "tie", "untie", "zip", "button", "dress", "undress", "kneel", "crawl",
    "hop", "skip", "march", "race", "swing", "toss", "juggle", "balance",
    "stumble", "trip", "land", "dive", "splash", "float", "cry", "shout",
    "whisper", "yell", "nod", "bow", "stare", "glance", "gather",
}

# Plural-looking words kept verbatim (on-screen text, pluralia tantum).
INVARIANT_PLURALS = {
    "credits", "clothes", "glasses", "scissors", "pants", "shorts",
    "jeans", "stairs", "news", "sunglasses",
}

IRREGULAR_PLURALS = {
    "men": "man", "people": "person", "children": "child",
    "women": "woman", "feet": "foot", "teeth": "tooth", "mice": "mouse",
    "geese": "goose",
}

_CONTRACTION_SUFFIXES = {
    "m": "am", "re": "are", "s": "is", "ve": "have", "ll": "will",
    "d": "would", "t": "not",
}

# tokens that never survive as a tag, used by the fallback noun scan
_NON_CONTENT = (
    DETERMINERS | POSSESSIVES | QUANTITY_WORDS | QUANTITY_OF_NOUNS
    | ADVERBS | SUBORDINATORS | HUMAN_PRONOUNS | PREPOSITIONS
    | RELATIVIZERS | AUX_VERBS | {"and", "or", "but", "not", "it", "its"}
)

# tokens a finite verb cannot directly follow (they mark NP-internal
# positions: "the credits", "both dressed")
_NP_INTERNAL_PRECEDERS = DETERMINERS | POSSESSIVES | QUANTITY_WORDS | {"other"}


@dataclass(frozen=True)
class TagList:
    """Ordered, deduplicated subject tags under a budget."""

    tags: tuple[str, ...]
    budget: int = DEFAULT_TAG_BUDGET

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("tag budget must be >= 1")
        if not (1 <= len(self.tags) <= self.budget):
            raise ValueError(
                f"tag count {len(self.tags)} outside [1, {self.budget}]")
        if len(set(self.tags)) != len(self.tags):
            raise ValueError("tags must be unique")
        for t in self.tags:
            if not t or t != t.strip() or t.lower() != t:
                raise ValueError(f"malformed tag {t!r}")

    def __iter__(self):
        return iter(self.tags)

    def __len__(self):
        return len(self.tags)


def _tokenize(text: str) -> list[str]:
    """Lowercase word tokens; commas kept as coordination separators."""
    out = []
    for tok in re.findall(r"[a-z]+'[a-z]+|[a-z]+|,", text.lower()):
        if "'" in tok:
            base, _, suffix = tok.partition("'")
            out.append(base)
            if suffix in _CONTRACTION_SUFFIXES:
                out.append(_CONTRACTION_SUFFIXES[suffix])
        else:
            out.append(tok)
    return out


def _is_lexicon_verb(token: str) -> bool:
    if token in VERB_BASES:
        return True
    for suffix in ("ing", "ed", "es", "s"):
        if token.endswith(suffix) and len(token) > len(suffix) + 1:
            stem = token[: -len(suffix)]
            if stem in VERB_BASES:
                return True
            # doubled final consonant: running -> runn -> run
            if len(stem) > 2 and stem[-1] == stem[-2] and stem[:-1] in VERB_BASES:
                return True
            # dropped final e: dancing -> danc -> dance
            if stem + "e" in VERB_BASES:
                return True
    return False


def _looks_inflected(token: str) -> bool:
    return (
        (token.endswith("s") and not token.endswith("ss") and len(token) > 2)
        or (token.endswith("ed") and len(token) > 3)
        or (token.endswith("ing") and len(token) > 4)
    )


def _find_finite_verb(tokens: list[str]) -> int:
    """Index of the first finite-verb token, len(tokens) if none.

    A token counts as the finite verb when it is an auxiliary, or a
    (possibly inflected) lexicon verb / -s|-ed|-ing form not sitting in
    an NP-internal slot (i.e. not right after a determiner, possessive
    or quantity word).
    """
    for i, tok in enumerate(tokens):
        if tok == ",":
            continue
        if tok in AUX_VERBS:
            return i
        prev = tokens[i - 1] if i > 0 else None
        if prev in _NP_INTERNAL_PRECEDERS:
            continue
        if _is_lexicon_verb(tok) or _looks_inflected(tok):
            if tok in _NON_CONTENT or tok in INVARIANT_PLURALS:
                continue
            # a token right before an auxiliary is the subject, not the
            # verb ("dogs are running")
            nxt = tokens[i + 1] if i + 1 < len(tokens) else None
            if nxt in AUX_VERBS:
                continue
            return i
    return len(tokens)


def singularize(word: str) -> str:
    """Singularize a noun: irregular table, invariant plurals, then
    the suffix rules -ies>-y, -es>'' (stem ends s/x/z/ch/sh), -s>''."""
    if word in IRREGULAR_PLURALS:
        return IRREGULAR_PLURALS[word]
    if word in INVARIANT_PLURALS:
        return word
    if word.endswith("ies") and len(word) > 3:
        return word[:-3] + "y"
    if word.endswith("es") and len(word) > 3:
        stem = word[:-2]
        if stem.endswith(("s", "x", "z", "ch", "sh")):
            return stem
    if (
        word.endswith("s")
        and len(word) > 3
        and not word.endswith(("ss", "us", "is"))
    ):
        return word[:-1]
    return word


def normalize_noun(word: str) -> str | None:
    """Norm for a single candidate: pronoun mapping, singularization.

    Returns None when the token cannot stand as a class noun.
    """
    word = word.strip().lower()
    if not word or not word.isalpha():
        return None
    if word in HUMAN_PRONOUNS:
        return "person"
    if word in _NON_CONTENT:
        return None
    return singularize(word)


def _split_coordination(tokens: list[str]) -> list[list[str]]:
    chunks, current = [], []
    for tok in tokens:
        if tok == "," or tok == "and" or tok == "or":
            if current:
                chunks.append(current)
            current = []
        else:
            current.append(tok)
    if current:
        chunks.append(current)
    return chunks


def _normalize_chunk(tokens: list[str]) -> str | None:
    """Reduce one coordinated noun phrase to its head class noun."""
    tokens = [t for t in tokens if t not in SUBORDINATORS]
    if not tokens:
        return None

    # "<quant-noun> of <np>" is transparent: a group of people -> people
    for i, tok in enumerate(tokens[:-1]):
        if tok in QUANTITY_OF_NOUNS and tokens[i + 1] == "of":
            tokens = tokens[i + 2:]
            break
    if not tokens:
        return None

    # Cut postmodifiers (PP, participle, relative clause) once a head
    # candidate has been seen; earlier such tokens are premodifiers.
    head_seen = False
    cut = len(tokens)
    for i, tok in enumerate(tokens):
        if head_seen and (
            tok in PREPOSITIONS
            or tok in RELATIVIZERS
            or ((tok.endswith("ed") or tok.endswith("ing"))
                and (_is_lexicon_verb(tok) or len(tok) > 4)
                and tok not in _NON_CONTENT)
        ):
            cut = i
            break
        if tok not in _NP_INTERNAL_PRECEDERS and tok not in ADVERBS:
            head_seen = True
    tokens = tokens[:cut]

    kept = [
        t for t in tokens
        if t in HUMAN_PRONOUNS
        or (t not in DETERMINERS and t not in QUANTITY_WORDS
            and t not in ADVERBS and t not in QUANTITY_OF_NOUNS)
    ]
    if not kept:
        return None
    if kept[-1] in HUMAN_PRONOUNS:
        return "person"
    kept = [t for t in kept if t not in POSSESSIVES and t not in HUMAN_PRONOUNS]
    if not kept:
        return None
    return normalize_noun(kept[-1])


def _dedup_cap(tags: list[str], k_max: int) -> list[str]:
    seen, out = set(), []
    for t in tags:
        if t and t not in seen:
            seen.add(t)
            out.append(t)
        if len(out) == k_max:
            break
    return out


def _people_implied(tokens: list[str]) -> bool:
    return any(t in HUMAN_PRONOUNS or t in HUMAN_NOUNS for t in tokens)


def _first_concrete_noun(tokens: list[str]) -> str | None:
    for i, tok in enumerate(tokens):
        if tok == "," or tok in _NON_CONTENT or tok in VERB_BASES:
            continue
        prev = tokens[i - 1] if i > 0 else None
        if _is_lexicon_verb(tok) and prev not in _NP_INTERNAL_PRECEDERS:
            continue
        if (tok.endswith("ing") or tok.endswith("ed")) and _is_lexicon_verb(tok):
            continue
        norm = normalize_noun(tok)
        if norm:
            return norm
    return None


def _subject_tags(tokens: list[str]) -> list[str]:
    verb_at = _find_finite_verb(tokens)
    zone = tokens[:verb_at]
    tags = []
    for chunk in _split_coordination(zone):
        norm = _normalize_chunk(chunk)
        if norm:
            tags.append(norm)
    return tags


def _all_noun_tags(tokens: list[str]) -> list[str]:
    tags = []
    for i, tok in enumerate(tokens):
        if tok == "," or tok in _NON_CONTENT:
            continue
        prev = tokens[i - 1] if i > 0 else None
        if _is_lexicon_verb(tok) and prev not in _NP_INTERNAL_PRECEDERS:
            continue
        if _looks_inflected(tok) and (tok.endswith("ed") or tok.endswith("ing")):
            continue
        norm = normalize_noun(tok)
        if norm:
            tags.append(norm)
    return tags


def extract_tags_rule_based(
    query: str,
    k_max: int = DEFAULT_TAG_BUDGET,
    strategy: str = "subject",
) -> TagList:
    """Deterministic subject-tag extraction.

    strategy: "subject" (grammatical subjects of the main verb, the
    default), "single" (first subject noun only), "all" (every noun in
    the sentence). The result is never empty: falls back to "person"
    when people are implied, else to the first concrete noun.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    text = query.strip()
    if not text:
        raise ValueError("empty query")
    tokens = _tokenize(text)

    if strategy == "all":
        tags = _all_noun_tags(tokens)
    elif strategy in ("subject", "single"):
        tags = _subject_tags(tokens)
        if strategy == "single":
            tags = tags[:1]
    else:
        raise ValueError(f"unknown tag strategy {strategy!r}")

    tags = _dedup_cap(tags, k_max)
    if not tags:
        if _people_implied(tokens):
            tags = ["person"]
        else:
            noun = _first_concrete_noun(tokens)
            tags = [noun] if noun else ["person"]
    return TagList(tuple(tags), budget=k_max)


def parse_lm_reply(raw: str, k_max: int = DEFAULT_TAG_BUDGET) -> TagList:
    """Parse a comma-separated LM reply into a TagList (total function)."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    pieces = [p.strip().lower() for p in raw.split(",")]
    tags = _dedup_cap([p for p in pieces if p], k_max)
    if not tags:
        tags = ["person"]
    return TagList(tuple(tags), budget=k_max)


# System message for the LM-backed extractor. {k_max} is substituted.
TAG_EXTRACTION_SYSTEM_PROMPT = """\
You are an NLP tool for extracting normalized visual subjects for open-vocabulary object detection.
The input is an English sentence describing an action in a video.
Your job is to return ONLY the grammatical subject(s), normalized into simple noun classes.

Important:
- The input is always in English. Do NOT translate anything. Do NOT output any Chinese.
- Only output the final result as a comma-separated list in lowercase.
- Do NOT output any explanations, steps, or extra words.

Subject identification (Stage 1):
- Find who or what performs the main action in the sentence (the grammatical subject).
- If there are several subjects joined by 'and' or commas (e.g. 'I, my dog and my cat'), treat each as a separate subject.
- If the subject is a vague pronoun referring to people (e.g. 'some', 'someone', 'everyone', 'others'), treat it as a human subject.
- Ignore nouns that are NOT subjects (objects, tools, locations, goals, etc.).

Normalization rules (Stage 2):
- Keep only entities that could be visually detected in a frame (people, animals, objects, visible on-screen text like credits).
- Remove determiners and possessives: 'the man', 'a woman', 'my dog' -> 'man', 'woman', 'dog'.
- Remove quantity words: 'two men', 'three cats', 'a group of people' -> 'man', 'cat', 'person'.
- For human pronouns ('I', 'you', 'he', 'she', 'we', 'they') and vague human pronouns ('some', 'someone', 'everyone', 'others', 'anyone'), normalize to 'person'.
- Singularize plurals: 'men' -> 'man', 'cats' -> 'cat', 'people' -> 'person'.
- Drop descriptive modifiers and keep the core class noun: 'man wearing athletic gear' -> 'man'.
- If several subjects normalize to the same word, keep only one and preserve the order.

Self-check and fallback (Stage 3):
- Silently check each candidate: if it is being acted ON (object), used as a tool, or only appears inside a prepositional phrase, REMOVE it.
- This is video data: there is always some visible entity. You MUST always output at least one subject.
- If no clear subject remains after self-check, choose the most likely main visible entity:
  * First, prefer 'person' if people are implied.
  * Otherwise, choose the first concrete noun in the sentence (e.g. 'ball', 'car', 'credits').

Output:
- Output at most {k_max} normalized subjects.
- Output format: a comma-separated list, lowercase, e.g. 'person, dog'.
- No explanations, no JSON, no extra tokens.

Examples:
Sentence: "Two men both dressed in athletic gear are standing and talking in an indoor weight lifting gym filled with other equipment." -> man
Sentence: "One man is holding onto a rope attached to a machine, and the other man instructs him to bend down on his left knee while still holding onto the rope and showing the man how to have proper form." -> man
Sentence: "The man then instructs the man holding the rope to pull the row down a few times and he's talking the whole time." -> man
Sentence: "I, my dog and my cat are running together in the park." -> person, dog, cat
Sentence: "The credits of the clip are shown." -> credits
Sentence: "... and some are in wheel chairs." -> person
Sentence: "A man is holding a rope in a gym." -> man  (do NOT output 'rope' or 'gym')
Sentence: "A man pushes a woman in a wheel chair across the room." -> man  (do NOT output 'woman' or 'wheel chair' or 'room')
If everything is unclear, still choose the most likely main entity and output one subject.
"""


def build_tag_prompt(k_max: int = DEFAULT_TAG_BUDGET) -> str:
    return TAG_EXTRACTION_SYSTEM_PROMPT.format(k_max=k_max)


@dataclass
class LanguageModelEndpoint:
    """Chat-style HTTP endpoint used for LM-backed tag extraction.

    POSTs an OpenAI-style /chat/completions body with temperature 0 and
    reads the reply text from choices[0].message.content.
    """

    url: str
    model: str = "default"
    api_key: str | None = None
    timeout: float = 60.0
    _cache: dict = field(default_factory=dict, repr=False)

    def complete(self, system: str, user: str) -> str:
        import httpx

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": 0,
        }
        try:
            resp = httpx.post(self.url, json=body, headers=headers,
                              timeout=self.timeout)
            resp.raise_for_status()
            payload = resp.json()
        except Exception as exc:  # noqa: BLE001 - normalized below
            raise BackendError(f"LM endpoint {self.url} failed: {exc}") from exc
        try:
            return payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise AnswerParseError(str(payload), "unexpected LM reply shape") from exc


def extract_tags_via_lm(
    query: str,
    k_max: int,
    lm: LanguageModelEndpoint,
) -> TagList:
    """LM-backed extraction: prompt the endpoint, parse its reply.

    Results are cached per (query, k_max); transport failures raise
    BackendError so callers can fall back to the rule engine.
    """
    text = query.strip()
    if not text:
        raise ValueError("empty query")
    key = (text, k_max)
    if key in lm._cache:
        return lm._cache[key]
    raw = lm.complete(build_tag_prompt(k_max), text)
    result = parse_lm_reply(raw, k_max)
    lm._cache[key] = result
    return result
