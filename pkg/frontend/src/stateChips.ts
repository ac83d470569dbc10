// Helpers that turn server-provided dialog state and product positions into
// render-ready data. The UI never infers state on its own; everything here
// parses strings the service returned.

export interface StateChip {
  attribute: string;
  value: string;
}

// "flavor = vanilla ; brand = Folgers, Acme" -> one chip per (attr, value)
export function parseStateChips(state: string): StateChip[] {
  const chips: StateChip[] = [];
  if (!state.trim()) {
    return chips;
  }
  for (const part of state.split(';')) {
    const eq = part.indexOf('=');
    if (eq < 0) {
      continue;
    }
    const attribute = part.slice(0, eq).trim();
    for (const value of part.slice(eq + 1).split(',')) {
      if (value.trim()) {
        chips.push({ attribute, value: value.trim() });
      }
    }
  }
  return chips;
}

const ORDINALS = ['first', 'second', 'third', 'fourth', 'fifth',
  'sixth', 'seventh', 'eighth', 'ninth', 'tenth'];

export function ordinalWord(position: number): string {
  if (position < 1 || position > ORDINALS.length) {
    throw new Error(`position out of range: ${position}`);
  }
  return ORDINALS[position - 1];
}

// Canonical utterances: generated (not free-typed) so the rule tracker
// parses ordinal references deterministically.
export function buyUtterance(position: number): string {
  return `I will buy the ${ordinalWord(position)} one.`;
}

export function askUtterance(attribute: string, position: number): string {
  return `What ${attribute.replace(/_/g, ' ')} is the ${ordinalWord(position)} one.`;
}
