// DOM wiring for the chat workbench: transcript, state chips, product strip
// with ordinal buy/ask buttons, backend selector, and an optional debug panel.

import { ApiError, Backend, ProductCard, ServiceClient, UtteranceReply } from './api.js';
import { askUtterance, buyUtterance, ordinalWord, parseStateChips } from './stateChips.js';

const BACKENDS: Backend[] = ['rule', 'tfidf', 'neural', 'hybrid'];

interface Elements {
  transcript: HTMLElement;
  chips: HTMLElement;
  cards: HTMLElement;
  input: HTMLInputElement;
  send: HTMLButtonElement;
  backend: HTMLSelectElement;
  restart: HTMLButtonElement;
  banner: HTMLElement;
  debugToggle: HTMLInputElement;
  debug: HTMLElement;
}

export class ChatApp {
  private sessionId = '';
  private busy = false;

  constructor(private client: ServiceClient, private el: Elements) {}

  async start(): Promise<void> {
    this.el.backend.innerHTML = '';
    for (const b of BACKENDS) {
      const option = document.createElement('option');
      option.value = b;
      option.textContent = b;
      this.el.backend.appendChild(option);
    }
    this.el.send.addEventListener('click', () => void this.submit());
    this.el.input.addEventListener('keydown', (e) => {
      if (e.key === 'Enter') void this.submit();
    });
    this.el.restart.addEventListener('click', () => void this.restart());
    this.el.debugToggle.addEventListener('change', () => {
      this.el.debug.hidden = !this.el.debugToggle.checked;
    });
    this.el.debug.hidden = true;
    await this.restart();
  }

  async restart(): Promise<void> {
    this.el.transcript.innerHTML = '';
    this.el.chips.innerHTML = '';
    this.el.cards.innerHTML = '';
    this.el.banner.textContent = '';
    this.setBusy(false);
    try {
      const session = await this.client.openSession(this.el.backend.value as Backend);
      this.sessionId = session.session_id;
      this.addMessage('SYSTEM', session.greeting);
    } catch (err) {
      this.showError(err);
    }
  }

  async submit(): Promise<void> {
    const text = this.el.input.value.trim();
    if (!text || this.busy) return;
    this.el.input.value = '';
    await this.send(text);
  }

  // One in-flight request per session: input stays disabled until the reply.
  async send(text: string): Promise<void> {
    if (this.busy) return;
    this.setBusy(true);
    this.addMessage('USER', text);
    try {
      const reply = await this.client.sendUtterance(this.sessionId, text);
      this.render(reply);
    } catch (err) {
      this.showError(err);
    } finally {
      this.setBusy(false);
    }
  }

  private render(reply: UtteranceReply): void {
    this.addMessage('SYSTEM', reply.reply);
    this.renderChips(reply.state);
    if (reply.reply_intent === 'push') {
      this.renderCards(reply.products);
    }
    if (reply.status === 'PURCHASED') {
      this.el.banner.textContent = 'Order placed — thanks for shopping!';
      this.el.banner.className = 'banner success';
    } else if (reply.status === 'EXPIRED') {
      this.el.banner.textContent = 'Session expired. Restart to continue.';
      this.el.banner.className = 'banner expired';
    }
    this.el.debug.textContent = reply.debug
      ? JSON.stringify(reply.debug, null, 2) : '';
  }

  private renderChips(state: string): void {
    this.el.chips.innerHTML = '';
    for (const chip of parseStateChips(state)) {
      const span = document.createElement('span');
      span.className = 'chip';
      span.textContent = `${chip.attribute}: ${chip.value}`;
      this.el.chips.appendChild(span);
    }
  }

  private renderCards(products: ProductCard[]): void {
    this.el.cards.innerHTML = '';
    for (const product of products) {
      const card = document.createElement('div');
      card.className = 'card';
      const title = document.createElement('div');
      title.className = 'card-ordinal';
      title.textContent = `${product.position}. (${ordinalWord(product.position)})`;
      const profile = document.createElement('div');
      profile.className = 'card-profile';
      profile.textContent = product.profile;
      const buy = document.createElement('button');
      buy.textContent = 'Buy';
      buy.addEventListener('click', () => void this.send(buyUtterance(product.position)));
      const ask = document.createElement('button');
      ask.textContent = 'Ask brand';
      ask.addEventListener('click', () =>
        void this.send(askUtterance('brand', product.position)));
      card.append(title, profile, buy, ask);
      this.el.cards.appendChild(card);
    }
  }

  private addMessage(speaker: 'USER' | 'SYSTEM', text: string): void {
    const div = document.createElement('div');
    div.className = `message ${speaker.toLowerCase()}`;
    div.textContent = text;
    this.el.transcript.appendChild(div);
    this.el.transcript.scrollTop = this.el.transcript.scrollHeight;
  }

  private showError(err: unknown): void {
    if (err instanceof ApiError && err.status === 409) {
      this.el.banner.textContent = 'Session expired or closed. Restart to continue.';
      this.el.banner.className = 'banner expired';
    } else if (err instanceof ApiError) {
      this.el.banner.textContent = `Error: ${err.message}`;
      this.el.banner.className = 'banner error';
    } else {
      // network failure: keep the transcript, offer a retry via restart
      this.el.banner.textContent = 'Network error — transcript preserved, retry or restart.';
      this.el.banner.className = 'banner error';
    }
  }

  private setBusy(busy: boolean): void {
    this.busy = busy;
    this.el.input.disabled = busy;
    this.el.send.disabled = busy;
  }
}

export function mount(baseUrl = ''): ChatApp {
  const byId = <T extends HTMLElement>(id: string) =>
    document.getElementById(id) as T;
  const app = new ChatApp(new ServiceClient(baseUrl), {
    transcript: byId('transcript'),
    chips: byId('chips'),
    cards: byId('cards'),
    input: byId<HTMLInputElement>('utterance'),
    send: byId<HTMLButtonElement>('send'),
    backend: byId<HTMLSelectElement>('backend'),
    restart: byId<HTMLButtonElement>('restart'),
    banner: byId('banner'),
    debugToggle: byId<HTMLInputElement>('debug-toggle'),
    debug: byId('debug'),
  });
  void app.start();
  return app;
}
