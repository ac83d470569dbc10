// UI round trip against a live service. Runs only when CONVSHOP_SERVICE_URL
// points at a running `convshop serve`; skipped otherwise so the frontend
// suite passes standalone. Drives the reference conversation and asserts the
// data the chips / card strip / success banner render from.
import { describe, expect, it } from 'vitest';

import { ServiceClient } from '../src/api';
import { buyUtterance, parseStateChips } from '../src/stateChips';

const url = process.env.CONVSHOP_SERVICE_URL;

describe.skipIf(!url)('live service round trip', () => {
  it('drives the reference conversation end to end', async () => {
    const client = new ServiceClient(url);
    const session = await client.openSession('rule');
    expect(session.greeting).toContain('Hello');

    let reply = await client.sendUtterance(
      session.session_id, 'Please find me vanilla instant coffee packets.');
    const chips = parseStateChips(reply.state);
    expect(chips).toContainEqual({ attribute: 'flavor', value: 'vanilla' });
    expect(chips).toContainEqual({ attribute: 'item_type', value: 'instant-coffee' });

    // answer each request with "any ... is fine" until the service pushes a
    // card strip; the agent runs out of attributes to ask within 8 turns
    for (let i = 0; i < 8 && reply.reply_intent === 'request'; i += 1) {
      const match = reply.reply.match(/Do you have a (.+) in mind\?/);
      expect(match).not.toBeNull();
      reply = await client.sendUtterance(
        session.session_id, `any ${match![1]} is fine with me`);
    }
    expect(reply.reply_intent).toBe('push');
    expect(reply.products.length).toBeGreaterThan(0);
    expect(reply.products.length).toBeLessThanOrEqual(5);
    expect(reply.products.map((p) => p.position)).toEqual(
      reply.products.map((_, i) => i + 1));

    reply = await client.sendUtterance(session.session_id, buyUtterance(1));
    expect(reply.reply_intent).toBe('notify_success');
    expect(reply.status).toBe('PURCHASED');

    const transcript = await client.getTranscript(session.session_id);
    expect(transcript.status).toBe('PURCHASED');
    expect(transcript.purchased_id).toBeTruthy();
  }, 30000);
});
