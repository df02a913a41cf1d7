"""Writes the mock-provider script replaying a three-step FIF session on rsa_ctrl.v."""
import sys

enc = {"IDLE": "1000", "INIT": "1100", "LOAD1": "0000", "LOAD2": "0100",
       "MULT": "0010", "SQR": "1010", "RESULT": "1110"}
protected = "RESULT"
edges = [("IDLE", "INIT"), ("INIT", "LOAD1"), ("LOAD1", "LOAD2"), ("LOAD2", "MULT"),
         ("MULT", "SQR"), ("SQR", "MULT"), ("MULT", "IDLE")]
bp = enc[protected]


def row(name, bits):
    return name + "\t" + "\t".join(str(b) for b in bits)


out = ["%%% transitions", "modified state transition list:"]
for k, (a, b) in enumerate(edges, 1):
    out.append(f"- state transition {k}: {a} ({enc[a]}) -> {b} ({enc[b]})")
out.append(f"- protected_state: {protected} ({bp})")

out += ["", "%%% bits"]
for k, (a, b) in enumerate(edges, 1):
    bx, by = enc[a], enc[b]
    out.append(f"State transition {k}: {a} ({bx}) -> {b} ({by}), protected_state (encoding={protected})")
    out.append(f"bx = {bx}, by = {by}, bp = {bp}, n = {len(bx)}")
    out.append(row("i", ["0 (MSB)", 1, 2, 3]))
    out.append(row("bx_i", bx))
    out.append(row("by_i", by))
    out.append(row("bp_i", bp))
    out.append("")

out += ["%%% fif", "FIF_i = ((bx_i XOR by_i) OR (bx_i AND bp_i))", ""]
for k, (a, b) in enumerate(edges, 1):
    x = [int(c) for c in enc[a]]
    y = [int(c) for c in enc[b]]
    p = [int(c) for c in bp]
    xor = [i ^ j for i, j in zip(x, y)]
    and_ = [i & j for i, j in zip(x, p)]
    fif = [i | j for i, j in zip(xor, and_)]
    overall = 1
    for f in fif:
        overall *= f
    out.append(f"State transition {k}: {a} ({enc[a]}) -> {b} ({enc[b]}), protected_state (encoding={protected})")
    out.append(row("i", range(4)))
    out.append(row("bx_i", x))
    out.append(row("by_i", y))
    out.append(row("bp_i", p))
    out.append(row("bx_i XOR by_i", xor))
    out.append(row("bx_i AND bp_i", and_))
    out.append(row("Calculated FIF_i", fif))
    out.append("Overall FIF = FIF_0 x FIF_1 x FIF_2 x FIF_3 = " + " x ".join(map(str, fif)) + f" = {overall}")
    out.append("")

sys.stdout.write("\n".join(out).rstrip() + "\n")
