"""Boolean keyword queries: parse, canonical form, matching.

Run: python demos/01_filter_queries.py
"""
from labelloop import matches, parse_query, print_query, tokenize
from labelloop.filterlang import ParseError

queries = [
    "(measles OR mumps) AND vaccine",
    '"flu shot" OR vaxxer',
    "vaccine AND NOT hoax",
]
texts = [
    "Get your flu shot today!",
    "the measles vaccine works",
    "mumps outbreak reported",
    "this vaccine hoax needs to stop",
    "#vaxxer thread: read this",
]

for source in queries:
    query = parse_query(source)
    print(f"query:     {source}")
    print(f"canonical: {print_query(query)}")
    for text in texts:
        hit = matches(query, tokenize(text))
        print(f"  {'MATCH ' if hit else '      '} {text!r}")
    print()

print("parse errors carry byte offsets:")
for bad in ("a AND", "(unclosed OR paren", ""):
    try:
        parse_query(bad)
    except ParseError as exc:
        print(f"  {bad!r}: {exc.message} at offset {exc.offset}")
