// Dependency-free base64 so the same bytes round-trip in browsers and node.

const ALPHABET = 'ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/';

const REVERSE = new Int16Array(128).fill(-1);
for (let i = 0; i < ALPHABET.length; i++) REVERSE[ALPHABET.charCodeAt(i)] = i;

export function b64encode(bytes: Uint8Array): string {
  const parts: string[] = [];
  for (let i = 0; i < bytes.length; i += 3) {
    const b0 = bytes[i];
    const b1 = i + 1 < bytes.length ? bytes[i + 1] : 0;
    const b2 = i + 2 < bytes.length ? bytes[i + 2] : 0;
    const triple = (b0 << 16) | (b1 << 8) | b2;
    parts.push(ALPHABET[(triple >> 18) & 63]);
    parts.push(ALPHABET[(triple >> 12) & 63]);
    parts.push(i + 1 < bytes.length ? ALPHABET[(triple >> 6) & 63] : '=');
    parts.push(i + 2 < bytes.length ? ALPHABET[triple & 63] : '=');
  }
  return parts.join('');
}

export function b64decode(text: string): Uint8Array {
  const clean = text.replace(/[\r\n]/g, '');
  if (clean.length % 4 !== 0) throw new Error('base64 length must be a multiple of 4');
  let pad = 0;
  if (clean.endsWith('==')) pad = 2;
  else if (clean.endsWith('=')) pad = 1;
  const out = new Uint8Array((clean.length / 4) * 3 - pad);
  let o = 0;
  for (let i = 0; i < clean.length; i += 4) {
    const vals = [0, 1, 2, 3].map((k) => {
      const ch = clean.charCodeAt(i + k);
      if (clean[i + k] === '=') return 0;
      const v = ch < 128 ? REVERSE[ch] : -1;
      if (v < 0) throw new Error(`invalid base64 character ${clean[i + k]}`);
      return v;
    });
    const triple = (vals[0] << 18) | (vals[1] << 12) | (vals[2] << 6) | vals[3];
    if (o < out.length) out[o++] = (triple >> 16) & 255;
    if (o < out.length) out[o++] = (triple >> 8) & 255;
    if (o < out.length) out[o++] = triple & 255;
  }
  return out;
}
