#!/usr/bin/env python3
"""Writes the miniature RRC corpora shipped in data/.

rrc_mini.jsonl holds annotated training sections; rrc_holdout.jsonl holds
unannotated sections for extraction. Section text is original wording in the
style of RRC procedure descriptions. Output is deterministic.
"""

import argparse
import json
from pathlib import Path

HEADER = {"format": "protodep.annotations", "version": 1}

# (section_id, context, identifiers, [(source, destination, [properties])])
TRAIN = [
    (
        "setup-request",
        "The UE shall set the ue-Identity to ng-5G-S-TMSI-Part1 if upper layers provide a 5G-S-TMSI. "
        "Otherwise the UE shall draw a 39-bit randomValue and set the ue-Identity to the randomValue. "
        "The UE shall set the establishmentCause according to the information received from upper layers.",
        ["ue-Identity", "establishmentCause", "ng-5G-S-TMSI-Part1", "randomValue"],
        [
            ("ng-5G-S-TMSI-Part1", "ue-Identity", ["include"]),
            ("randomValue", "ue-Identity", ["include"]),
        ],
    ),
    (
        "security-activation",
        "Upon reception of the SecurityModeCommand the UE shall derive the KgNB key. "
        "The UE shall derive the K_RRCint key from the KgNB and the integrityProtAlgorithm. "
        "The UE shall derive the K_RRCenc key from the KgNB and the cipheringAlgorithm. "
        "The UE shall verify the integrity protection of the SecurityModeCommand using the K_RRCint key.",
        ["KgNB", "K_RRCint", "K_RRCenc", "integrityProtAlgorithm", "cipheringAlgorithm"],
        [
            ("KgNB", "K_RRCint", ["generate"]),
            ("KgNB", "K_RRCenc", ["generate"]),
            ("integrityProtAlgorithm", "K_RRCint", ["generate"]),
            ("cipheringAlgorithm", "K_RRCenc", ["generate"]),
        ],
    ),
    (
        "setup-complete",
        "After security activation the dedicatedNAS-Message is ciphered with the K_RRCenc key and "
        "integrity protected using the K_RRCint key. The UE shall set the selectedPLMN-Identity to the "
        "PLMN selected by upper layers and include it in the RRCSetupComplete message.",
        ["dedicatedNAS-Message", "K_RRCenc", "K_RRCint", "selectedPLMN-Identity"],
        [
            ("K_RRCenc", "dedicatedNAS-Message", ["confidentiality"]),
            ("K_RRCint", "dedicatedNAS-Message", ["integrity"]),
        ],
    ),
    (
        "key-refresh",
        "When the nextHopChainingCount changes the UE shall derive a new KgNB from the next hop parameter. "
        "The UE shall derive the K_UPenc key from the KgNB and the cipheringAlgorithm. "
        "The UE shall derive the K_UPint key from the KgNB.",
        ["nextHopChainingCount", "KgNB", "K_UPenc", "K_UPint", "cipheringAlgorithm"],
        [
            ("nextHopChainingCount", "KgNB", ["generate"]),
            ("KgNB", "K_UPenc", ["generate"]),
            ("KgNB", "K_UPint", ["generate"]),
            ("cipheringAlgorithm", "K_UPenc", ["generate"]),
        ],
    ),
    (
        "reconfiguration",
        "The network shall include the radioBearerConfig and the masterCellGroup in the RRCReconfiguration. "
        "The masterCellGroup is ciphered with the K_RRCenc key. The radioBearerConfig is integrity protected "
        "using the K_RRCint key. The UE shall apply the measConfig received from the network.",
        ["radioBearerConfig", "masterCellGroup", "K_RRCenc", "K_RRCint", "measConfig"],
        [
            ("K_RRCenc", "masterCellGroup", ["confidentiality"]),
            ("K_RRCint", "radioBearerConfig", ["integrity"]),
        ],
    ),
    (
        "resume-request",
        "The UE shall set the resumeIdentity to the fullI-RNTI stored during suspension. "
        "The UE shall compute the resumeMAC-I with the K_RRCint key over the resume input. "
        "The network authenticates the UE by verifying the resumeMAC-I against the resumeIdentity.",
        ["resumeIdentity", "fullI-RNTI", "resumeMAC-I", "K_RRCint"],
        [
            ("fullI-RNTI", "resumeIdentity", ["include"]),
            ("K_RRCint", "resumeMAC-I", ["generate"]),
            ("resumeMAC-I", "resumeIdentity", ["authentication"]),
        ],
    ),
    (
        "counter-check",
        "The network shall include the drb-CountMSB-Info in the CounterCheck message. "
        "The UE shall compare the count-Uplink of each radio bearer with the drb-CountMSB-Info and report "
        "the drb-Identity with a mismatching count. The network records the count-Uplink of the "
        "drb-Identity for charging.",
        ["drb-CountMSB-Info", "count-Uplink", "drb-Identity"],
        [
            ("count-Uplink", "drb-CountMSB-Info", ["include"]),
            ("count-Uplink", "drb-Identity", ["accounting"]),
        ],
    ),
    (
        "data-volume",
        "The UE shall report the data volume of each drb-Identity in the count-Downlink field. "
        "The network records the count-Downlink of the drb-Identity for charging. "
        "The UE shall include the measResults when configured.",
        ["count-Downlink", "drb-Identity", "measResults"],
        [
            ("count-Downlink", "drb-Identity", ["accounting"]),
        ],
    ),
    (
        "measurement-report",
        "The UE shall set the measResults to the measured values of the serving cell. "
        "The measResults is ciphered with the K_RRCenc key and integrity protected using the K_RRCint key. "
        "The UE shall include the measId of the reporting configuration.",
        ["measResults", "K_RRCenc", "K_RRCint", "measId"],
        [
            ("K_RRCenc", "measResults", ["confidentiality"]),
            ("K_RRCint", "measResults", ["integrity"]),
            ("measId", "measResults", ["include"]),
        ],
    ),
    (
        "ue-information",
        "The UE shall include the rlf-Report in the UEInformationResponse. "
        "The rlf-Report is ciphered with the K_RRCenc key and integrity protected using the K_RRCint key. "
        "The network authenticates the UE by verifying the shortResumeMAC-I against the rlf-Report.",
        ["rlf-Report", "K_RRCenc", "K_RRCint", "shortResumeMAC-I"],
        [
            ("K_RRCenc", "rlf-Report", ["confidentiality"]),
            ("K_RRCint", "rlf-Report", ["integrity"]),
            ("shortResumeMAC-I", "rlf-Report", ["authentication"]),
        ],
    ),
]

# (section_id, context, identifiers)
HOLDOUT = [
    (
        "connection-establishment",
        "The UE shall set the ue-Identity to the randomValue when no 5G-S-TMSI is available and set the "
        "establishmentCause from upper layers. After security activation the UE shall derive the "
        "K_RRCint key from the KgNB and the K_RRCenc key from the same KgNB. The dedicatedNAS-Message is "
        "ciphered with the K_RRCenc key and integrity protected using the K_RRCint key. The masterCellGroup "
        "is ciphered with the K_RRCenc key. The UE shall set the selectedPLMN-Identity to the PLMN selected by upper layers.",
        [
            "ue-Identity",
            "establishmentCause",
            "randomValue",
            "KgNB",
            "K_RRCint",
            "K_RRCenc",
            "dedicatedNAS-Message",
            "masterCellGroup",
            "selectedPLMN-Identity",
        ],
    ),
    (
        "bearer-accounting",
        "The network records the count-Uplink of the drb-Identity for charging and shall include the "
        "drb-CountMSB-Info in the CounterCheck message. The radioBearerConfig is integrity protected "
        "using the K_RRCint key.",
        ["count-Uplink", "drb-Identity", "drb-CountMSB-Info", "radioBearerConfig", "K_RRCint"],
    ),
]


def write(path: Path, records) -> None:
    with path.open("w", encoding="utf-8", newline="\n") as out:
        out.write(json.dumps(HEADER, separators=(",", ":")) + "\n")
        for r in records:
            out.write(json.dumps(r, separators=(",", ":")) + "\n")


def train_records(doc: str):
    for i, (sid, text, ids, edges) in enumerate(TRAIN):
        # One document per section keeps repeated identifier pairs distinct.
        doc_id = f"{doc}-{i:02d}"
        yield {"type": "section", "doc_id": doc_id, "section_id": sid, "identifiers": ids, "context": text}
        for s, d, props in edges:
            assert s in ids and d in ids, (sid, s, d)
            yield {"type": "sample", "doc_id": doc_id, "section_id": sid, "source": s, "destination": d,
                   "labels": props, "provenance": "expert"}


def holdout_records(doc: str):
    for sid, text, ids in HOLDOUT:
        yield {"type": "section", "doc_id": doc, "section_id": sid, "identifiers": ids, "context": text}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "data")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    write(args.out / "rrc_mini.jsonl", train_records("rrc-train"))
    write(args.out / "rrc_holdout.jsonl", holdout_records("rrc-holdout"))


if __name__ == "__main__":
    main()
