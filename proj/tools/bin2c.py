#!/usr/bin/env python3
"""Convert a binary file into a C array include (used for embedded assets)."""
import sys


def main() -> int:
    if len(sys.argv) != 4:
        print("usage: bin2c.py <input> <output.inc> <symbol>", file=sys.stderr)
        return 1
    data = open(sys.argv[1], "rb").read()
    sym = sys.argv[3]
    with open(sys.argv[2], "w") as out:
        out.write(f"static const unsigned char {sym}[] = {{\n")
        for i in range(0, len(data), 20):
            chunk = ",".join(str(b) for b in data[i : i + 20])
            out.write(chunk + ",\n")
        out.write("};\n")
        out.write(f"static const unsigned long {sym}_len = {len(data)}UL;\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
