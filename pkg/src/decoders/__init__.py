from src.decoders.alphabet import BASES, BLANK, context_encode, decode, encode, reduce_path
from src.decoders.ctc import (
    ctc_beam_decode, ctc_greedy_decode, ctc_loss, emission_posteriors, sequence_log_likelihood,
)
from src.decoders.rna import RNAHead, rna_beam_decode, rna_emission_posteriors, rna_log_likelihood, rna_loss
from src.decoders.fastq import FastqRecord, phred_string, read_fastq, write_fastq

__all__ = [
    "BASES", "BLANK", "FastqRecord", "RNAHead", "context_encode", "ctc_beam_decode",
    "ctc_greedy_decode", "ctc_loss", "decode", "emission_posteriors", "encode", "phred_string",
    "read_fastq", "reduce_path", "rna_beam_decode", "rna_emission_posteriors",
    "rna_log_likelihood", "rna_loss", "sequence_log_likelihood", "write_fastq",
]
