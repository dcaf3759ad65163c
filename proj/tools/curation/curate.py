#!/usr/bin/env python3
"""Builds the packaged BE and SWE datasets under data/ from tables in a LaTeX-flavoured markdown source.

Tables that exist in the text are parsed directly. Inputs the text only shows as
figures (contact matrices, commuter flows, input-output matrix, criticality) are
synthesized; see data/README.md for the rules.

    python3 tools/curation/curate.py --source SOURCE.md [--out data]
"""

import argparse
import math
import re
from pathlib import Path

import numpy as np

AGE_LABELS = [f"{5 * i}-{5 * i + 4}" for i in range(16)] + ["80+"]
ACTIVE_W = np.array([0, 0, 0, 0.8] + [1.0] * 9 + [0.2, 0, 0, 0])
N_AGES = 17

# National age pyramids, thousands per 5-year bin (2020).
PYRAMID = {
    "BE": [625, 655, 650, 625, 655, 720, 745, 760, 760, 800, 815, 815, 725, 625, 540, 370, 650],
    "SWE": [600, 630, 620, 560, 600, 720, 720, 660, 640, 690, 680, 620, 570, 560, 560, 430, 530],
}

# (id, name as printed in the table, display name, lat, lon)
PATCHES = {
    "BE": [
        ("BE10", "Brussels", "Brussels", 50.85, 4.35),
        ("BE21", "Antwerpen", "Antwerpen", 51.22, 4.60),
        ("BE22", "Limburg", "Limburg", 50.98, 5.35),
        ("BE23", "Oost-Vlaanderen", "Oost-Vlaanderen", 51.03, 3.80),
        ("BE24", "Vlaams-Brabant", "Vlaams-Brabant", 50.88, 4.60),
        ("BE25", "West-Vlaanderen", "West-Vlaanderen", 51.05, 3.05),
        ("BE31", "Brabant Wallon", "Brabant Wallon", 50.67, 4.58),
        ("BE32", "Hainaut", "Hainaut", 50.45, 3.95),
        ("BE33", "Li\\`ege", "Liège", 50.53, 5.65),
        ("BE34", "Luxembourg", "Luxembourg", 49.95, 5.45),
        ("BE35", "Namur", "Namur", 50.35, 4.85),
    ],
    "SWE": [
        ("SE110", "Stockholm", "Stockholm", 59.4, 18.2),
        ("SE121", "Uppsala", "Uppsala", 60.0, 17.7),
        ("SE122", 'S\\"odermanland', "Södermanland", 59.1, 16.8),
        ("SE123", '\\"Osterg\\"otland', "Östergötland", 58.4, 15.6),
        ("SE124", '\\"Orebro', "Örebro", 59.3, 15.0),
        ("SE125", 'V\\"astmanland', "Västmanland", 59.7, 16.3),
        ("SE211", 'J\\"onk\\"oping', "Jönköping", 57.6, 14.3),
        ("SE212", "Kronoberg", "Kronoberg", 56.8, 14.5),
        ("SE213", "Kalmar", "Kalmar", 57.2, 16.2),
        ("SE214", "Gotland", "Gotland", 57.5, 18.5),
        ("SE221", "Blekinge", "Blekinge", 56.2, 15.3),
        ("SE224", "Skåne", "Skåne", 55.8, 13.5),
        ("SE231", "Halland", "Halland", 56.9, 12.7),
        ("SE232", 'V\\"astra G\\"otaland', "Västra Götaland", 58.0, 12.3),
        ("SE311", 'V\\"armland', "Värmland", 59.7, 13.2),
        ("SE312", "Dalarma", "Dalarna", 61.0, 14.5),
        ("SE313", 'G\\"avleborg', "Gävleborg", 61.3, 16.2),
        ("SE321", 'V\\"asternorrland', "Västernorrland", 63.0, 17.5),
        ("SE322", 'J\\"amtland', "Jämtland", 63.2, 14.0),
        ("SE331", 'V\\"asterbotten', "Västerbotten", 64.7, 18.5),
        ("SE332", "Norrbotten", "Norrbotten", 66.8, 20.5),
    ],
}

CAPITAL = {"BE": "BE10", "SWE": "SE110"}
BETA = {"BE": 0.031, "SWE": 0.034}
SEASONALITY = {"BE": (0.158, -15.8), "SWE": (0.243, 7.7)}
IC_BEDS = {"BE": 1000, "SWE": 600}
REFERENCE_POPULATION = 11431000
EXOGENOUS = {"BE": {"investment": 0.162, "exports_goods": 0.25}, "SWE": {"investment": 0.069, "exports_goods": 0.14}}
SERVICES_SHOCK = 0.21
# Where the first wave was seeded; the remainder is spread by population.
SEED_PATTERN = {"BE": {"BE22": 0.3, "BE32": 0.3}, "SWE": {"SE110": 0.85, "SE211": 0.15}}
# Rescaled with `epinomic calibrate --anchor-date` so hospital incidence is 0.6 per 100k on
# 2020-03-15 (BE) and 0.2 per 100k on 2020-03-11 (SWE); starting totals were 60 and 40.
SEED_TOTAL = {"BE": 320.4, "SWE": 36.1}
HOLIDAYS = {
    "BE": [("2020-02-24", "2020-03-01"), ("2020-04-06", "2020-04-19"), ("2020-07-01", "2020-08-31"),
           ("2020-11-02", "2020-11-15"), ("2020-12-21", "2021-01-03")],
    "SWE": [("2020-02-17", "2020-03-08"), ("2020-04-06", "2020-04-13"), ("2020-06-11", "2020-08-18"),
            ("2020-10-26", "2020-11-01"), ("2020-12-21", "2021-01-07")],
}
CALIBRATED = {"nu": 20.8, "xi_eff": 0.39, "pi_eff": 0.070, "pi_work": 0.032, "pi_leisure": 0.055,
              "mu": 0.76, "iota_h": 7.0, "iota_f": 6.1}

# Average daily work contacts per employee by NACE-21 letter.
WORK_INTENSITY = {"A": 4.1, "B": 8.0, "C": 8.0, "H": 8.0, "D": 9.0, "E": 5.4, "F": 5.4, "G": 27.1, "I": 27.1,
                  "R": 27.1, "K": 10.0, "J": 9.5, "M": 9.5, "L": 12.0, "S": 12.0, "T": 12.0, "P": 25.8,
                  "Q": 25.8, "N": 14.3, "O": 14.3}
CUSTOMER_SHARE = {"G": 0.5, "I": 0.5, "R": 0.5, "S": 0.4, "T": 0.4, "L": 0.3, "N": 0.2, "Q": 0.5, "P": 0.7}
LEISURE_LETTERS = set("IRST")
TARGET_R0 = 3.0


# ---------------------------------------------------------------- formatting

def fmt(v):
    """Shortest round-trip text in the same layout as C++ std::to_chars."""
    v = float(v)
    if v == 0.0:
        return "0"
    if not math.isfinite(v):
        raise ValueError("non-finite value")
    sign = "-" if v < 0 else ""
    r = repr(abs(v))
    mant, _, exp = r.partition("e")
    exp = int(exp) if exp else 0
    if "." in mant:
        ip, fp = mant.split(".")
    else:
        ip, fp = mant, ""
    digits = (ip + fp).lstrip("0")
    point = len(ip) + exp - (len(ip + fp) - len((ip + fp).lstrip("0")))
    digits = digits.rstrip("0") or "0"
    n = len(digits)
    # fixed
    if point <= 0:
        fixed = "0." + "0" * (-point) + digits
    elif point >= n:
        fixed = digits + "0" * (point - n)
    else:
        fixed = digits[:point] + "." + digits[point:]
    e = point - 1
    sci = digits[0] + ("." + digits[1:] if n > 1 else "") + "e" + ("-" if e < 0 else "+") + f"{abs(e):02d}"
    return sign + (fixed if len(fixed) <= len(sci) else sci)


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(header) + "\n")
        for r in rows:
            f.write(",".join(x if isinstance(x, str) else fmt(x) for x in r) + "\n")


# ---------------------------------------------------------------- source tables

def table_rows(text, label):
    end = text.index("\\label{" + label + "}")
    start = text.rfind("\\begin{tabular}", 0, end)
    body = text[start:end]
    rows = []
    for line in body.splitlines():
        line = line.strip()
        if "&" not in line or line.startswith("\\textbf") or line.startswith("&") or "multicolumn" in line:
            continue
        line = re.sub(r"\\\\.*$", "", line)
        cells = [c.strip() for c in line.split("&")]
        rows.append(cells)
    return rows


def num(cell):
    cell = cell.replace("$", "").replace("\\num{", "").replace("}", "").strip()
    if cell.startswith("<"):
        return 0.05
    return float(cell)


def parse_source(path):
    text = Path(path).read_text(encoding="utf-8")
    out = {}
    for code, label in (("BE", "tab:demography_BE"), ("SWE", "tab:demography_SWE")):
        rows = {r[0]: [num(c) for c in r[1:]] for r in table_rows(text, label) if r[0] != "Total"}
        out["demography_" + code] = rows
    hes = {r[0]: r for r in table_rows(text, "tab:hesitancy")}
    lav = {r[0]: r for r in table_rows(text, "tab:ERMG_lav")}
    stock = {r[0]: r for r in table_rows(text, "tab:EPNM_stock")}
    codes = [r[0] for r in table_rows(text, "tab:ERMG_lav")]
    sectors = []
    for c in codes:
        sectors.append({
            "code": c,
            "employee_share": num(hes[c][1]) / 100.0,
            "fp": num(hes[c][2]),
            "f_telework": num(lav[c][1]) / 100.0,
            "f_workplace": num(lav[c][2]) / 100.0,
            "lav_c": num(lav[c][3]) / 100.0,
            "lav_d": num(lav[c][4]) / 100.0,
            "inventory_days": num(stock[c][2]),
        })
    out["sectors"] = sectors
    for code, label in (("BE", "tab:EPNM_initial_states_BE"), ("SWE", "tab:EPNM_initial_states_SWE")):
        io = {}
        for r in table_rows(text, label):
            if r[0] in ("NACE 64",):
                continue
            io[r[0]] = [num(x) for x in r[2:6]]
        out["io_" + code] = io
    ef = {r[0]: r[1:] for r in table_rows(text, "tab:policies_BE_EF")}
    a = {r[0]: r[1:] for r in table_rows(text, "tab:policies_BE_A")}
    out["policy_dates"] = ["2020-" + d for d in ef["\\textbf{Par.}"]] if "\\textbf{Par.}" in ef else None
    out["policy_E"] = [num(x) for x in ef["$\\bm{E}(t)$"]]
    out["policy_F"] = [num(x.replace("^1", "")) for x in ef["$\\bm{F}(t)$"]]
    out["policy_A"] = {k: [num(x) for x in v] for k, v in a.items()}
    return out


POLICY_DATES = ["2020-03-15", "2020-05-04", "2020-05-18", "2020-06-08", "2020-07-01", "2020-08-03",
                "2020-08-24", "2020-10-19", "2020-11-02", "2020-11-27"]


# ---------------------------------------------------------------- geography

def haversine(a, b):
    la1, lo1, la2, lo2 = map(math.radians, (a[0], a[1], b[0], b[1]))
    h = math.sin((la2 - la1) / 2) ** 2 + math.cos(la1) * math.cos(la2) * math.sin((lo2 - lo1) / 2) ** 2
    return 2 * 6371.0 * math.asin(math.sqrt(h))


def build_geo(code, demo):
    pyr = np.array(PYRAMID[code], float)
    pyr /= pyr.sum()
    geo = []
    for pid, printed, name, lat, lon in PATCHES[code]:
        inhab, density, outbound, employed, abc, girst = demo[printed]
        total = inhab * 1000.0
        pop = np.round(pyr * total)
        geo.append({
            "id": pid, "name": name, "lat": lat, "lon": lon, "population": pop,
            "area": round(total / density, 1), "active": float(pop @ ACTIVE_W),
            "outbound": outbound / 100.0, "employed": employed / 100.0,
            "abc": abc / 100.0, "girst": girst / 100.0,
        })
    return geo


def build_mobility(geo):
    G = len(geo)
    M = np.zeros((G, G))
    for g, a in enumerate(geo):
        working = a["employed"] * a["active"]
        out = a["outbound"] * a["active"]
        w = np.array([0.0 if h == g else b["population"].sum() / haversine((a["lat"], a["lon"]), (b["lat"], b["lon"])) ** 2
                      for h, b in enumerate(geo)])
        M[g] = out * w / w.sum()
        M[g, g] = working - out
    return np.round(M)


# ---------------------------------------------------------------- contacts

def reciprocal(M, T):
    C = M * T[:, None]
    C = 0.5 * (C + C.T)
    return C / T[:, None]


def gauss(d, w):
    return np.exp(-0.5 * (d / w) ** 2)


def contact_matrices(T):
    idx = np.arange(N_AGES)
    d = idx[None, :] - idx[:, None]  # j - i
    share = T / T.sum()

    home = share[None, :] * (1.0 * gauss(d, 0.8) + 0.55 * (gauss(d - 6, 1.0) + gauss(d + 6, 1.0))
                             + 0.15 * (gauss(d - 12, 1.2) + gauss(d + 12, 1.2)))
    home = reciprocal(home, T)
    home *= 3.4 / (share @ home.sum(axis=1))

    school = np.zeros((N_AGES, N_AGES))
    kids = {0: 3.0, 1: 11.0, 2: 12.0, 3: 8.0}
    for i, c in kids.items():
        for j in range(4):
            school[i, j] = c * (0.8 if i == j else 0.1 * (abs(i - j) == 1))
        for j in range(5, 13):
            school[i, j] = 0.6 * share[j] / share[5:13].sum()
    school = reciprocal(school, T)

    intensity = np.array([1.5, 3.0, 3.5, 4.0, 3.5, 3.0, 3.0, 3.0, 2.8, 2.6, 2.4, 2.2, 2.0, 1.8, 1.6, 1.3, 1.0])
    pub = share[None, :] * (gauss(d, 1.6) + 0.1)
    pub = pub / pub.sum(axis=1, keepdims=True) * intensity[:, None]
    pub = reciprocal(pub, T)

    priv = share[None, :] * (gauss(d, 1.2) + 0.3 * (gauss(d - 6, 1.2) + gauss(d + 6, 1.2)) + 0.05)
    priv = priv / priv.sum(axis=1, keepdims=True) * (0.8 * intensity[:, None])
    priv = reciprocal(priv, T)

    work = {}
    act = share * ACTIVE_W
    for letter, c in WORK_INTENSITY.items():
        rows = np.zeros((N_AGES, N_AGES))
        rho = CUSTOMER_SHARE.get(letter, 0.1)
        if letter == "P":
            cust = np.where(idx <= 3, share, 0.0) * np.array([0.3, 1, 1, 1] + [0] * 13)
        elif letter == "Q":
            cust = share * (1.0 + idx / 4.0)
        else:
            cust = share.copy()
        cust = cust / cust.sum()
        for i in range(N_AGES):
            if ACTIVE_W[i] == 0:
                continue
            coll = act * gauss(idx - i, 3.0)
            coll /= coll.sum()
            rows[i] = c * ACTIVE_W[i] * ((1 - rho) * coll + rho * cust)
        work[letter] = rows
    return {"home": home, "school": school, "leisure_public": pub, "leisure_private": priv, "work": work}


# ---------------------------------------------------------------- input-output

GOODS = [c for c in ["A01", "A02", "A03", "B05-09"]]


def letter(code):
    return code[0]


def io_prior(codes):
    """Structured prior for the intermediate-use matrix (rows supply, columns use)."""
    K = len(codes)
    P = np.full((K, K), 0.05)
    L = [letter(c) for c in codes]
    idx = {c: k for k, c in enumerate(codes)}
    for k in range(K):
        P[k, k] += 3.0
        for l in range(K):
            if L[k] == L[l] and k != l:
                P[k, l] += 0.6
    general = {"D35": 0.8, "G46": 0.8, "H49": 0.6, "H52": 0.5, "K64": 0.5, "L68": 0.5, "M69-70": 0.6,
               "M71": 0.4, "N78": 0.4, "N80-82": 0.6, "J62-63": 0.4, "J61": 0.3, "C19": 0.3, "H53": 0.2,
               "M73": 0.2, "K65": 0.2, "E37-39": 0.2, "F41-43": 0.2, "C33": 0.2, "C18": 0.1, "C17": 0.1}
    for s, w in general.items():
        P[idx[s], :] += w
    manuf = [k for k, c in enumerate(codes) if L[k] in "BCF"]
    for a, users, w in [
        ("A01", ["C10-12", "I55-56", "A01"], 3.0), ("A02", ["C16", "C17"], 3.0), ("A03", ["C10-12", "I55-56"], 3.0),
        ("B05-09", ["C19", "C23", "C24", "D35", "C20"], 3.0), ("C10-12", ["I55-56", "A01", "Q86", "Q87-88"], 2.0),
        ("C13-15", ["C22", "C31-32", "G47"], 1.0), ("C16", ["F41-43", "C31-32", "C17"], 2.0),
        ("C17", ["C18", "C10-12", "J58"], 2.0), ("C19", ["H49", "H50", "H51", "C20", "A01", "F41-43"], 2.0),
        ("C20", ["C21", "C22", "A01", "C10-12", "C17", "Q86"], 2.0), ("C21", ["Q86", "Q87-88"], 3.0),
        ("C22", ["C29", "C27", "F41-43", "C10-12"], 1.5), ("C23", ["F41-43"], 3.0),
        ("C24", ["C25", "C28", "C29", "C30", "C27"], 3.0), ("C25", ["F41-43", "C28", "C29", "C30", "C33"], 2.0),
        ("C26", ["C27", "C28", "C29", "J61", "J62-63"], 1.5), ("C27", ["C28", "C29", "F41-43", "D35"], 1.5),
        ("C28", ["C29", "C30", "C33", "F41-43", "A01"], 1.5), ("C29", ["G45", "H49"], 1.5),
        ("C30", ["H50", "H51", "H49"], 1.5), ("C33", ["C28", "C29", "C30", "D35", "H51"], 1.0),
        ("D35", manuf, 1.0), ("E36", ["C10-12", "I55-56", "C20", "D35"], 1.0), ("F41-43", ["L68", "O84"], 2.0),
        ("G45", ["H49"], 1.0), ("G47", ["I55-56"], 0.5), ("H50", ["H52"], 1.0), ("H51", ["N79"], 2.0),
        ("H52", ["H49", "H50", "H51", "G46"], 1.5), ("I55-56", ["N79", "M71", "O84"], 0.5),
        ("J58", ["M73", "J62-63"], 0.5), ("J59-60", ["M73", "J58", "R90-92"], 1.0),
        ("K65", ["K64"], 1.0), ("K66", ["K64", "K65"], 1.5), ("L68", ["G47", "I55-56", "Q87-88", "K64"], 1.0),
        ("M72", ["C21", "C20", "C26", "P85"], 1.0), ("N77", ["F41-43", "H49", "H51"], 1.0),
        ("N79", ["I55-56", "H51"], 0.5), ("O84", ["P85", "Q86"], 0.3), ("Q86", ["Q87-88"], 1.0),
        ("R90-92", ["J59-60", "R93"], 0.5), ("S95", ["G47"], 0.3), ("S94", ["P85"], 0.2),
    ]:
        for u in users:
            ui = u if isinstance(u, int) else idx[u]
            P[idx[a], ui] += w
    # Consumer-facing activities and households supply little to firms.
    for c in ["T97-98", "S96", "R93", "Q87-88", "P85"]:
        P[idx[c], :] *= 0.2
    return P


def ras(P, rows, cols, iters=5000, tol=1e-12):
    Z = P.copy()
    Z[rows <= 0, :] = 0.0
    rows = np.maximum(rows, 0.0)
    for _ in range(iters):
        rs = Z.sum(axis=1)
        Z *= np.divide(rows, rs, out=np.zeros_like(rows), where=rs > 0)[:, None]
        cs = Z.sum(axis=0)
        Z *= np.divide(cols, cs, out=np.zeros_like(cols), where=cs > 0)[None, :]
        if np.max(np.abs(Z.sum(axis=1) - rows)) <= tol * rows.max():
            break
    # Close rows exactly; columns carry the residual.
    rs = Z.sum(axis=1)
    Z *= np.divide(rows, rs, out=np.zeros_like(rows), where=rs > 0)[:, None]
    return Z


def build_io(codes, table):
    x = np.array([table[c][0] for c in codes])
    c0 = np.array([table[c][1] for c in codes])
    f0 = np.array([table[c][2] for c in codes])
    l0 = np.array([table[c][3] for c in codes])
    rows = np.maximum(x - c0 - f0, 0.0)
    cols = np.maximum(x - l0, 0.0)
    cols = cols / cols.sum() * rows.sum()
    Z = ras(io_prior(codes), rows, cols)
    Z = np.round(Z, 3)
    # Rounding residual goes to the diagonal so rows still close.
    resid = rows - Z.sum(axis=1)
    for k in range(len(codes)):
        if rows[k] > 0:
            Z[k, k] = round(Z[k, k] + resid[k], 3)
    # Rows whose printed x − c − f is negative (rounding in the source) get f absorbing the gap.
    f_fixed = f0.copy()
    neg = x - c0 - f0 < 0
    f_fixed[neg] = x[neg] - c0[neg] - Z[neg].sum(axis=1)
    return Z, x, c0, f_fixed, l0


def criticality(codes, Z):
    K = len(codes)
    crit = np.zeros((K, K))
    use = Z.sum(axis=0)
    idx = {c: k for k, c in enumerate(codes)}
    for k in range(K):
        if use[k] <= 0:
            continue
        for l in range(K):
            share = Z[l, k] / use[k]
            if letter(codes[l]) in LEISURE_LETTERS or codes[l] in ("N77", "N79"):
                continue
            if share >= 0.10:
                crit[l, k] = 1.0
            elif share >= 0.03:
                crit[l, k] = 0.5
        if letter(codes[k]) in "BC" and Z[idx["D35"], k] > 0 and crit[idx["D35"], k] == 0:
            crit[idx["D35"], k] = 0.5
    return crit


def exogenous_split(codes, f0):
    rows = []
    for c in codes:
        L = letter(c)
        if L in "OPQ":
            s = [0.9, 0.05, 0.0, 0.05]
        elif c.startswith("F"):
            s = [0.05, 0.9, 0.0, 0.05]
        elif L in "ABCDE":
            s = [0.0, 0.2, 0.8, 0.0] if L != "D" and L != "E" else [0.2, 0.1, 0.4, 0.3]
        elif c in ("C26", "C28", "C29", "C30"):
            s = [0.0, 0.4, 0.6, 0.0]
        elif L in "RST":
            s = [0.5, 0.0, 0.0, 0.5]
        else:
            s = [0.1, 0.3, 0.0, 0.6]
        rows.append(s)
    return np.array(rows)


def lmc(geo, base):
    codes_abc = np.array([letter(c) in "ABC" for c in base["codes"]])
    codes_g = np.array([letter(c) in "GIRST" for c in base["codes"]])
    b = np.array(base["shares"], float)
    b = b / b.sum()
    out = np.zeros((len(geo), len(b)))
    for g, p in enumerate(geo):
        row = b.copy()
        rest = ~(codes_abc | codes_g)
        row[codes_abc] *= p["abc"] / b[codes_abc].sum()
        row[codes_g] *= p["girst"] / b[codes_g].sum()
        row[rest] *= (1 - p["abc"] - p["girst"]) / b[rest].sum()
        out[g] = row / row.sum()
    return out


# ---------------------------------------------------------------- R0 scaling

def ngm_radius(T, P, totals_local, works, s, dur):
    n, G = T.shape
    N = n * G
    K = np.zeros((N, N))
    for g in range(G):
        loc = totals_local[g]
        K[g * n:(g + 1) * n, g * n:(g + 1) * n] += (s * T[:, g])[:, None] * loc * dur / T[:, g][None, :]
        for h in range(G):
            if P[g, h] == 0:
                continue
            K[g * n:(g + 1) * n, h * n:(h + 1) * n] += (s * T[:, g])[:, None] * P[g, h] * works[h] * dur / T[:, h][None, :]
    return max(abs(np.linalg.eigvals(K)))


def scale_to_R0(code, geo, mob, contacts, lmc_mat, codes):
    T = np.stack([p["population"] for p in geo], axis=1)
    active = np.array([p["active"] for p in geo])
    P = mob / active[:, None]
    s = np.array([56, 56, 82] + [100] * 14) / 100.0
    dur = 0.7 + 7.0
    per_sector = [contacts["work"][letter(c)] for c in codes]
    works = [sum(lmc_mat[g, k] * per_sector[k] for k in range(len(codes))) for g in range(len(geo))]
    rest = contacts["school"] + contacts["leisure_public"] + contacts["leisure_private"]

    def r0(f):
        loc = [contacts["home"] + f * rest for _ in geo]
        return BETA[code] * ngm_radius(T, P, loc, [f * w for w in works], s, dur)

    lo, hi = 0.05, 20.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        (lo, hi) = (mid, hi) if r0(mid) < TARGET_R0 else (lo, mid)
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------- country config

def toml_value(v):
    if isinstance(v, str):
        return '"' + v + '"'
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        s = fmt(v)
        return s if any(ch in s for ch in ".e") else s + ".0"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(toml_value(x) for x in v) + "]"
    raise TypeError(v)


def inline(d):
    return "{ " + ", ".join(f'"{k}" = {toml_value(v)}' for k, v in d.items()) + " }"


def be_policy(src, codes):
    A = src["policy_A"]
    E, F = src["policy_E"], src["policy_F"]
    out = []
    for t, date in enumerate(POLICY_DATES):
        closure = {"default": 0.0}
        for c in codes:
            if A[c][t] != 0:
                closure[c] = A[c][t]
        cp = {"date": date, "closure": closure, "telework": {"default": E[t]},
              "private_ban": {"default": F[t]}, "school_closure": {"default": A["P85"][t]}}
        if date == "2020-08-03":
            cp["private_ban"]["BE21"] = 1.0
        out.append(cp)
    return out


def swe_policy():
    return [{"date": "2020-03-11", "closure": {"default": 0.0, "P85": 0.2, "R90-92": 0.2},
             "telework": {"default": 0.0}, "private_ban": {"default": 0.0}, "school_closure": {"default": 0.2}}]


def write_country_toml(path, code, geo, policy):
    pop = sum(p["population"].sum() for p in geo)
    weights = dict(SEED_PATTERN[code])
    rest = 1.0 - sum(weights.values())
    others = [p for p in geo if p["id"] not in weights]
    other_pop = sum(p["population"].sum() for p in others)
    seeds = {}
    for p in geo:
        w = weights.get(p["id"], rest * p["population"].sum() / other_pop)
        seeds[p["id"]] = round(SEED_TOTAL[code] * w, 4)
    amp, shift = SEASONALITY[code]
    ex = EXOGENOUS[code]
    lines = [
        "# Country-level configuration for the packaged dataset.",
        f'code = "{code}"',
        f'capital = "{CAPITAL[code]}"',
        "",
        "[ic]",
        f"beds = {toml_value(float(IC_BEDS[code]))}",
        "reference_beds = 1000.0",
        f"reference_population = {toml_value(float(REFERENCE_POPULATION))}",
        "fraction = 1.0",
        "",
        "[epi]",
        f"beta = {toml_value(BETA[code])}",
        f"seasonal_amplitude = {toml_value(amp)}",
        f"seasonal_shift = {toml_value(shift)}",
        "",
        "[parameters]",
    ]
    lines += [f"{k} = {toml_value(v)}" for k, v in CALIBRATED.items()]
    lines += [
        "",
        "[seeds]",
        'date = "2020-02-01"',
        f"exposed = {inline(seeds)}",
        "",
        "[exogenous]",
        "government = 0.0",
        f"investment = {toml_value(ex['investment'])}",
        f"exports_goods = {toml_value(ex['exports_goods'])}",
        f"exports_services = {toml_value(SERVICES_SHOCK)}",
        'ramp_in_start = "2020-03-01"',
        'ramp_in_end = "2020-04-01"',
        'ramp_out_start = "2020-05-01"',
        'ramp_out_end = "2020-09-01"',
        'services_ramp_out_end = "2021-09-01"',
        "",
        "[calendar]",
        "holidays = [" + ", ".join(toml_value(list(h)) for h in HOLIDAYS[code]) + "]",
    ]
    for cp in policy:
        lines += ["", "[[policy]]", f'date = "{cp["date"]}"']
        for key in ("closure", "telework", "private_ban", "school_closure"):
            lines.append(f"{key} = {inline(cp[key])}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- main

def build(code, src, out_root):
    root = Path(out_root) / code
    root.mkdir(parents=True, exist_ok=True)
    sectors = src["sectors"]
    codes = [s["code"] for s in sectors]
    geo = build_geo(code, src["demography_" + code])
    mob = build_mobility(geo)

    Z, x, c0, f0, l0 = build_io(codes, src["io_" + code])
    crit = criticality(codes, Z)
    base = {"codes": codes, "shares": [s["employee_share"] for s in sectors] if code == "BE" else list(l0)}
    L = lmc(geo, base)

    T_nat = sum(p["population"] for p in geo)
    contacts = contact_matrices(T_nat)
    f = scale_to_R0(code, geo, mob, contacts, L, codes)
    for key in ("school", "leisure_public", "leisure_private"):
        contacts[key] = contacts[key] * f
    contacts["work"] = {k: v * f for k, v in contacts["work"].items()}

    shares = np.array([s["employee_share"] for s in sectors])
    shares = shares / shares.sum()

    write_csv(root / "demography.csv", ["patch", "age_bin", "population"],
              [(p["id"], AGE_LABELS[i], p["population"][i]) for p in geo for i in range(N_AGES)])
    write_csv(root / "active_population.csv", ["patch", "name", "area_km2", "active_population"],
              [(p["id"], p["name"], p["area"], p["active"]) for p in geo])
    write_csv(root / "mobility.csv", ["origin", "destination", "commuters"],
              [(a["id"], b["id"], mob[g, h]) for g, a in enumerate(geo) for h, b in enumerate(geo)])
    for key in ("home", "school", "leisure_public", "leisure_private"):
        m = contacts[key]
        write_csv(root / f"contacts_{key}.csv", ["age_i", "age_j", "rate"],
                  [(AGE_LABELS[i], AGE_LABELS[j], m[i, j]) for i in range(N_AGES) for j in range(N_AGES)])
    letters = []
    for c in codes:
        if letter(c) not in letters:
            letters.append(letter(c))
    write_csv(root / "contacts_work.csv", ["sector", "age_i", "age_j", "rate"],
              [(l, AGE_LABELS[i], AGE_LABELS[j], contacts["work"][l][i, j])
               for l in letters for i in range(N_AGES) for j in range(N_AGES)])
    write_csv(root / "sectors.csv",
              ["code", "f_workplace", "f_telework", "lav_c", "lav_d", "fp", "inventory_days", "employee_share"],
              [(s["code"], s["f_workplace"], s["f_telework"], s["lav_c"], s["lav_d"], s["fp"], s["inventory_days"],
                shares[k]) for k, s in enumerate(sectors)])
    write_csv(root / "criticality.csv", ["sector", "input_sector", "level"],
              [(codes[k], codes[l], crit[l, k]) for k in range(len(codes)) for l in range(len(codes)) if crit[l, k] != 0])
    write_csv(root / "lmc.csv", ["patch", "sector", "share"],
              [(p["id"], codes[k], L[g, k]) for g, p in enumerate(geo) for k in range(len(codes))])
    write_csv(root / "io_z.csv", ["sector"] + codes, [[codes[k]] + list(Z[k]) for k in range(len(codes))])
    write_csv(root / "io_vectors.csv", ["sector", "x0", "c0", "f0", "l0"],
              [(codes[k], x[k], c0[k], f0[k], l0[k]) for k in range(len(codes))])
    split = exogenous_split(codes, f0)
    write_csv(root / "exogenous_split.csv", ["sector", "government", "investment", "exports_goods", "exports_services"],
              [[codes[k]] + list(split[k]) for k in range(len(codes))])
    policy = be_policy(src, codes) if code == "BE" else swe_policy()
    write_country_toml(root / "country.toml", code, geo, policy)

    P = mob / np.array([p["active"] for p in geo])[:, None]
    out_frac = 1 - np.diag(P) / P.sum(axis=1)
    print(f"{code}: patches={len(geo)} sectors={len(codes)} contact scale={f:.4f} "
          f"mean outbound={np.average(mob.sum(1) - np.diag(mob), weights=None) / np.mean([p['active'] for p in geo]):.3f} "
          f"intermediate share={Z.sum() / x.sum():.3f} critical={int((crit == 1).sum())} important={int((crit == 0.5).sum())}")
    return out_frac


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--source", required=True, help="markdown file holding the source tables")
    ap.add_argument("--out", default="data")
    args = ap.parse_args()
    src = parse_source(args.source)
    for code in ("BE", "SWE"):
        build(code, src, args.out)


if __name__ == "__main__":
    main()
