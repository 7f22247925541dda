"""Writes golden.iih and golden.csv with an encoder independent of the C++ code."""
import json
import struct

WIDTH, HEIGHT, PERIOD = 5, 3, 12500
META = {"source": "golden", "trials": 4}
EVENTS = [  # (t_ps, x, y, channel)
    (0, 0, 0, 2),
    (10, 4, 2, 0),
    (10, 4, 2, 1),
    (2600, 1, 1, 0),
    (12500, 0, 0, 2),
    (12499 + 2**40, 3, 0, 1),
    (12499 + 2**40, 0, 0, 2),
]


def main():
    meta = json.dumps(META, separators=(",", ":")).encode()
    blob = b"IIH1" + struct.pack("<HHQI", WIDTH, HEIGHT, PERIOD, len(meta)) + meta
    for t, x, y, c in EVENTS:
        blob += struct.pack("<BHHQ", c, x, y, t)
    with open("golden.iih", "wb") as f:
        f.write(blob)
    with open("golden.csv", "w") as f:
        f.write("channel,x,y,t_ps\n")
        for t, x, y, c in EVENTS:
            f.write(f"{c},{x},{y},{t}\n")


if __name__ == "__main__":
    main()
