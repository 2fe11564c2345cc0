from .siggen import PoreModel, ReadRecord, generate_read
from .dataset import decode_records, encode_record, generate_dataset
from .ingestion import load_all, load_meta, load_split, reads_frame
from .chunks import Chunk, cut_chunks, iterate_batches
