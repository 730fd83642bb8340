"""Feature-hashing embedding of a fixed phrase and a matcher paraphrase pair."""

from common import cosine, embed, fnv1a64, tokenize

vec = embed("security review")
print("security review nonzero buckets:")
for tok in tokenize("security review"):
    h = fnv1a64(tok)
    print(f"  {tok}: fnv={h:#018x} bucket={h % 64} sign={'-' if h >> 63 else '+'}")
print("  entries:", {i: round(x, 12) for i, x in enumerate(vec) if x != 0.0})
print("  norm:", sum(x * x for x in vec) ** 0.5)

filing = "api gateway expansion for Umbrella Health"
for para in ["expansion of api gateway at Umbrella Health group",
             "Umbrella Health api gateway expansion opportunity",
             "quarterly lunch menu"]:
    print(f"cosine({para!r}) = {cosine(embed(para), embed(filing)):.15f}")
