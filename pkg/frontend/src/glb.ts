/**
 * Minimal glTF-binary reader for the pipeline's output layout: one mesh
 * primitive with POSITION / TEXCOORD_0 / indices and one embedded JPEG.
 */

export interface GlbMesh {
  positions: Float32Array; // xyz triples
  uvs: Float32Array;       // uv pairs
  indices: Uint32Array;    // triangle list
  textureJpeg: Uint8Array;
  doc: Record<string, any>;
}

const MAGIC = 0x46546c67;
const JSON_CHUNK = 0x4e4f534a;
const BIN_CHUNK = 0x004e4942;

export function parseGlb(data: ArrayBuffer): GlbMesh {
  const view = new DataView(data);
  if (view.getUint32(0, true) !== MAGIC) {
    throw new Error("not a glb file");
  }
  if (view.getUint32(4, true) !== 2) {
    throw new Error("unsupported glb version");
  }
  const total = view.getUint32(8, true);
  if (total !== data.byteLength) {
    throw new Error(`length mismatch: header ${total}, got ${data.byteLength}`);
  }
  let offset = 12;
  let doc: Record<string, any> | null = null;
  let bin: Uint8Array = new Uint8Array(0);
  while (offset < data.byteLength) {
    const len = view.getUint32(offset, true);
    const type = view.getUint32(offset + 4, true);
    const chunk = new Uint8Array(data, offset + 8, len);
    offset += 8 + len;
    if (type === JSON_CHUNK) {
      doc = JSON.parse(new TextDecoder().decode(chunk));
    } else if (type === BIN_CHUNK) {
      bin = chunk;
    }
  }
  if (!doc) throw new Error("glb has no JSON chunk");

  const accessorData = (index: number): ArrayBuffer => {
    const acc = doc!.accessors[index];
    const bv = doc!.bufferViews[acc.bufferView];
    const width = { SCALAR: 1, VEC2: 2, VEC3: 3, VEC4: 4 }[
      acc.type as "SCALAR" | "VEC2" | "VEC3" | "VEC4"
    ];
    const size = { 5126: 4, 5123: 2, 5125: 4 }[acc.componentType as 5126 | 5123 | 5125];
    const start = (bv.byteOffset ?? 0) + (acc.byteOffset ?? 0);
    const bytes = acc.count * width * size;
    return bin.buffer.slice(bin.byteOffset + start, bin.byteOffset + start + bytes);
  };

  const prim = doc.meshes[0].primitives[0];
  const positions = new Float32Array(accessorData(prim.attributes.POSITION));
  const uvs = new Float32Array(accessorData(prim.attributes.TEXCOORD_0));
  const idxAcc = doc.accessors[prim.indices];
  const raw = accessorData(prim.indices);
  const indices =
    idxAcc.componentType === 5123
      ? Uint32Array.from(new Uint16Array(raw))
      : new Uint32Array(raw);

  const img = doc.images[0];
  const iv = doc.bufferViews[img.bufferView];
  const textureJpeg = new Uint8Array(
    bin.buffer,
    bin.byteOffset + (iv.byteOffset ?? 0),
    iv.byteLength,
  );
  return { positions, uvs, indices, textureJpeg, doc };
}
