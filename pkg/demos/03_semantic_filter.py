"""Which edits count as behaviour-preserving.

Run: python demos/03_semantic_filter.py
"""

# %%
from culprit.semantic import fingerprint_file, normalise, tokenize

before = """
int clamp(int v, int lo, int hi) {
    if (v < lo) return lo;   // too small
    return v > hi ? hi : v;
}
"""

# %% comments and layout are ignored
reformatted = """
int clamp(int v, int lo, int hi)
{
    /* lower bound */
    if (v < lo) {
        return lo;
    }
    return v > hi ? hi : v;
}
"""
print(fingerprint_file(before).matches(fingerprint_file(reformatted)))

# %% the normalised token stream both versions reduce to
print(" ".join(t.text for t in normalise(tokenize(reformatted))))

# %% a brace that swallows the next statement changes behaviour
swallowed = before.replace(
    "if (v < lo) return lo;   // too small\n    return v > hi ? hi : v;",
    "if (v < lo) { return lo;\n    return v > hi ? hi : v; }",
)
print(fingerprint_file(before).matches(fingerprint_file(swallowed)))

# %% anything the lexer cannot read is never called equal
broken = before.replace("too small", 'too "small').replace("// ", "")
fp = fingerprint_file(broken)
print(fp.comparable, fp.reason)
