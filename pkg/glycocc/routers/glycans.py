"""
Glycan structure API routes.
"""
import logging
from contextlib import contextmanager
from typing import List

from fastapi import APIRouter, HTTPException
from pydantic import BaseModel, Field

from glycocc.config import MORGAN_BITS, MORGAN_RADIUS
from glycocc.errors import InvariantViolation, UserError
from glycocc.services.assembly import assemble
from glycocc.services.complex_builder import build_cc, dump_complex
from glycocc.services.fingerprints import mono_fingerprint, morgan_fingerprint, tanimoto
from glycocc.services.glycan_grammar import parse_iupac
from glycocc.services.smiles import write_smiles

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/api/glycans", tags=["glycans"])


class GlycanRequest(BaseModel):
    iupac: str


class FingerprintRequest(BaseModel):
    iupac: str
    radius: int = Field(default=MORGAN_RADIUS, ge=0, le=6)
    n_bits: int = Field(default=MORGAN_BITS, ge=1, le=1 << 16)


class SimilarityRequest(BaseModel):
    a: str
    b: str


@contextmanager
def _http_errors():
    try:
        yield
    except UserError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except InvariantViolation as e:
        logger.error("Invariant violation: %s", e)
        raise HTTPException(status_code=500, detail=str(e))


@router.post("/parse")
async def parse_glycan(request: GlycanRequest):
    """Parse an IUPAC-condensed string into its monosaccharide tree."""
    with _http_errors():
        tree = parse_iupac(request.iupac)
    return tree.model_dump(mode="json")


@router.post("/assemble")
async def assemble_glycan(request: GlycanRequest):
    """Atom-level structure of a glycan as SMILES plus counts."""
    with _http_errors():
        graph = assemble(parse_iupac(request.iupac))
        smiles = write_smiles(graph)
    return {
        "smiles": smiles,
        "atoms": len(graph.atoms),
        "bonds": len(graph.bonds),
        "monomers": len(graph.monomer_names),
    }


@router.post("/complex")
async def glycan_complex(request: GlycanRequest):
    with _http_errors():
        cc = build_cc(assemble(parse_iupac(request.iupac)))
    sizes = cc.skeleton_sizes()
    return {"cells": {str(r): n for r, n in sizes.items()}, "dump": dump_complex(cc)}


@router.post("/fingerprint")
async def glycan_fingerprint(request: FingerprintRequest):
    """Indices of the set bits of the Morgan fingerprint."""
    with _http_errors():
        bits = morgan_fingerprint(assemble(parse_iupac(request.iupac)), request.radius, request.n_bits)
    on_bits: List[int] = [int(i) for i in bits.nonzero()[0]]
    return {"n_bits": request.n_bits, "radius": request.radius, "on_bits": on_bits}


@router.post("/similarity")
async def glycan_similarity(request: SimilarityRequest):
    """Tanimoto similarity of monosaccharide count fingerprints."""
    with _http_errors():
        a = mono_fingerprint(parse_iupac(request.a))
        b = mono_fingerprint(parse_iupac(request.b))
    return {"similarity": tanimoto(a, b)}
