import type { AppView } from './app.js';
import { formatPercent } from './format.js';
import type { ConnectionState, UiJobView } from './types.js';

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

/** Plain-DOM implementation of the view contract; no framework, no styling
 * beyond a handful of classes. */
export class DomView implements AppView {
  private confirmationTimer: number | null = null;

  showConfirmation(message: string): void {
    const popup = el<HTMLDivElement>('confirmation');
    popup.textContent = message;
    popup.hidden = false;
    if (this.confirmationTimer !== null) window.clearTimeout(this.confirmationTimer);
    this.confirmationTimer = window.setTimeout(() => {
      popup.hidden = true;
    }, 4000);
  }

  showFormError(message: string): void {
    const box = el<HTMLDivElement>('form-error');
    box.textContent = message;
    box.hidden = false;
  }

  clearFormError(): void {
    el<HTMLDivElement>('form-error').hidden = true;
  }

  setFormLocked(locked: boolean): void {
    el<HTMLButtonElement>('submit-button').disabled = locked;
    el<HTMLInputElement>('emoticon-a').disabled = locked;
    el<HTMLInputElement>('emoticon-b').disabled = locked;
    el<HTMLSelectElement>('backend-type').disabled = locked;
    el<HTMLInputElement>('shots').disabled = locked;
  }

  setAlgorithms(ids: string[]): void {
    el<HTMLDivElement>('algorithms').textContent = `available algorithms: ${ids.join(', ')}`;
  }

  setConnection(state: ConnectionState): void {
    const badge = el<HTMLSpanElement>('connection');
    badge.textContent = state;
    badge.className = `connection-${state}`;
  }

  renderJobs(views: UiJobView[]): void {
    const list = el<HTMLDivElement>('jobs');
    list.replaceChildren(...views.map((view) => this.renderJob(view)).reverse());
  }

  private renderJob(view: UiJobView): HTMLElement {
    const row = document.createElement('section');
    row.className = `job job-${view.status.toLowerCase()}`;
    row.dataset.processJobId = view.processJobId;

    const heading = document.createElement('header');
    heading.textContent =
      `${view.inputs.emoticonA} + ${view.inputs.emoticonB} · ${view.inputs.backendType} · ` +
      `${view.inputs.shots} shots · ${view.status}`;
    row.appendChild(heading);

    if (view.status === 'ERROR' && view.error) {
      const message = document.createElement('p');
      message.className = 'error-text';
      message.textContent = view.error;
      row.appendChild(message);
    }

    if (view.status === 'DONE' && view.bars) {
      for (const bar of view.bars) {
        const line = document.createElement('div');
        line.className = 'bar-line';
        const label = document.createElement('span');
        label.textContent = `${bar.label} ${formatPercent(bar.percent)}`;
        const fill = document.createElement('div');
        fill.className = 'bar-fill';
        fill.style.width = `${Math.max(1, Math.min(100, bar.percent))}%`;
        line.append(label, fill);
        row.appendChild(line);
      }
      if (view.backendName) {
        const backend = document.createElement('p');
        backend.className = 'backend-name';
        backend.textContent = `backend: ${view.backendName}`;
        row.appendChild(backend);
      }
      if (view.counts) {
        const toggle = document.createElement('details');
        const summary = document.createElement('summary');
        summary.textContent = 'raw bitstrings';
        toggle.appendChild(summary);
        const pre = document.createElement('pre');
        pre.textContent = Object.entries(view.counts)
          .map(([bits, count]) => `${bits}  ${count}`)
          .join('\n');
        toggle.appendChild(pre);
        row.appendChild(toggle);
      }
    }
    return row;
  }
}
