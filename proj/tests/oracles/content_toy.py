"""Lexical (saturating tf-idf) plus hashed-embedding content relevance on a
three-artifact corpus."""

import math

from common import artifact_id, cosine, embed, tokenize

K1 = 1.2
ALPHA = 0.5
docs = [
    ("Wiki", "Security review checklist", "Quarterly security review of the payment service."),
    ("Wiki", "Lunch menu", "Tacos on Friday."),
    ("Mail", "Re: review schedule", "Can we move the design review to Monday?"),
]
query = "security review schedule"

texts = {}
for app, title, body in docs:
    texts[artifact_id(app, " ".join(title.lower().split()))] = title + "\n" + body
tf = {}
df = {}
for aid, text in texts.items():
    counts = {}
    for t in tokenize(text):
        counts[t] = counts.get(t, 0) + 1
    tf[aid] = counts
    for t in counts:
        df[t] = df.get(t, 0) + 1
n = len(texts)


def idf(t):
    d = df.get(t, 0)
    return math.log(1 + (n - d + 0.5) / (d + 0.5))


terms = sorted(set(tokenize(query)))
qv = embed(query)
raw = {aid: sum(idf(t) * tf[aid][t] / (tf[aid][t] + K1) for t in terms if t in tf[aid]) for aid in texts}
lo, hi = min(raw.values()), max(raw.values())
for aid, text in texts.items():
    lex = (raw[aid] - lo) / (hi - lo) if hi > lo else (1.0 if raw[aid] > 0 else 0.0)
    sem = min(max(cosine(qv, embed(text)), 0.0), 1.0)
    print(f"{aid} {text.splitlines()[0]!r}: raw={raw[aid]:.15f} lexical={lex:.15f} "
          f"semantic={sem:.15f} content={ALPHA * lex + (1 - ALPHA) * sem:.15f}")
